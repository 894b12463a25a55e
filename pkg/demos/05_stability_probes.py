"""Discrete inf-sup constant and the adjoint approximation probe.

Run: python3 demos/05_stability_probes.py
"""
from dtnfem import config as cfgmod
from dtnfem.config import validate
from dtnfem.harness import study_eta_probe, study_infsup

# The inf-sup constant is computed densely in the kappa-weighted H1 norm.  It
# settles once N exceeds kappa R, as the truncated form approaches the exact one.
cfg = validate(cfgmod._merge(cfgmod.INFSUP_COARSE, {"study": {"N_list": [0, 1, 2, 4, 8, 16, 32]}}))
res = study_infsup(cfg)
print("inf-sup constant on the coarse mesh:")
for row in res.rows:
    print(f"  N={row['N']:3d}  beta_h = {row['beta_h']:.6f}")

# How well the discrete space approximates adjoint solutions with L2 data.
# The supremum over all data is out of reach; random smooth data give a lower
# bound, which should shrink roughly like h.
res = study_eta_probe(validate(cfgmod.ETA_PROBE), seed=1)
print("\nadjoint approximation probe (lower bound, max over samples):")
for row, eta in zip(res.rows, res.details["eta_lower_bound"]):
    print(f"  h={row['h']:.4f}  dofs={row['n_dofs']:5d}  probe = {eta:.4e}")

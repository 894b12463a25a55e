"""The DtN kernels Z_n(xi) and how fast the truncation gap closes.

Run: python3 demos/01_dtn_kernels.py
"""

from dtnfem.dtn import truncation_gap_constant
from dtnfem.kernels import KernelTable, verify_kernels, zn

# For n well below xi the kernel behaves like i*xi (a locally plane outgoing
# wave); once n passes xi it turns into the evanescent regime, -|n|.
xi = 4.0
table = KernelTable.build(2, xi, 12)
print(f"Z_n({xi}) for n = 0..12")
for n in range(13):
    z = table[n]
    print(f"  n={n:2d}  Z_n = {z.real:+9.4f} {z.imag:+9.4f}i   |Z_n|^2/((1+n^2)(1+xi^2)) = "
          f"{table.bound_ratio()[12 + n]:.4f}")

# The 3D kernel has the elementary closed form z_0 = i xi - 1.
print(f"\nz_0(1.5) = {zn(0, 1.5)}   (closed form {1.5j - 1})")

# The bound above makes the tail of the DtN series controllable: in the
# H^{3/2} x H^{1/2} pairing the neglected modes cost at most c(N) ~ 1/N.
print("\ntruncation-gap constant c(N, R=1, s=3/2) at kappa=2:")
for N in (4, 8, 16, 32, 64, 128):
    print(f"  N={N:4d}  c = {truncation_gap_constant(N, 1.0, 2.0, 1.5):.4e}")

print("\ninvariant suite:")
for check in verify_kernels():
    print(f"  {'pass' if check.passed else 'FAIL'}  {check.name:40s} {check.value:.3e}")

import numpy as np
import pytest

from dtnfem.femspace import assemble_forms
from dtnfem.kernels import WaveContext
from dtnfem.mesh import ObstacleSpec, build_mesh, refine


@pytest.fixture(scope="session")
def ctx():
    return WaveContext(2.0, 1.0, 16)


@pytest.fixture(scope="session")
def disk_mesh(ctx):
    """Coarse documented mesh: disk obstacle radius 0.4, h_target 0.25."""
    return build_mesh(ctx, ObstacleSpec.disk(0.4), 0.25)


@pytest.fixture(scope="session")
def star():
    return ObstacleSpec((0.05, -0.03), (0.4, 0.06, 0.0, 0.03), (0.0, 0.04, -0.02))


@pytest.fixture(scope="session")
def star_mesh(ctx, star):
    return build_mesh(ctx, star, 0.25)


@pytest.fixture(scope="session")
def fine_mesh(ctx):
    return build_mesh(ctx, ObstacleSpec.disk(0.5, c_lin=2.0), 0.0625)


@pytest.fixture(scope="session")
def fine_forms(fine_mesh):
    return assemble_forms(fine_mesh)


@pytest.fixture(scope="session")
def disk_hierarchy(ctx):
    meshes = [build_mesh(ctx, ObstacleSpec.disk(0.5, c_lin=2.0), 0.25)]
    for _ in range(3):
        meshes.append(refine(meshes[-1]))
    return meshes


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class _Criterion:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self, config):
        self.config = config

    def __call__(self, number: int, title: str, checks: dict, detail: str = ""):
        ok = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        if failed:
            line += f"; failed: {', '.join(failed)}"
        self.config._acceptance_lines.append((number, line))
        print(line)
        assert ok, line


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    return _Criterion(request.config)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(getattr(config, "_acceptance_lines", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)

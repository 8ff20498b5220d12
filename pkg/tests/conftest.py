import pytest

from floqade.harness import EpsGrid, SweepConfig, run_sweep
from floqade.model import ModelSpec
from floqade.spectral import build_ledger

ACCEPTANCE_WINDOW = (-0.45, 0.45)
ACCEPTANCE_GRID = EpsGrid(eps_max=1e-1, eps_min=3e-3, points=8)


@pytest.fixture(scope="session")
def spec_rwa16():
    return ModelSpec(omega0=1.0, Omega=1.0, rho=0.0, kind="rwa", n_modes=16)


@pytest.fixture(scope="session")
def spec_mod16():
    return ModelSpec(omega0=1.0, Omega=1.0, rho=1.0, kind="modified", n_modes=16)


@pytest.fixture(scope="session")
def spec_mod12():
    return ModelSpec(omega0=1.0, Omega=1.0, rho=1.0, kind="modified", n_modes=12)


@pytest.fixture(scope="session")
def rwa_sweep(spec_rwa16):
    """Full-scale sweep on the rotating-wave preset (shared; ~2.5 min)."""
    cfg = SweepConfig(spec=spec_rwa16, eps_grid=ACCEPTANCE_GRID,
                      s_window=ACCEPTANCE_WINDOW)
    return run_sweep(cfg)


@pytest.fixture(scope="session")
def modified_sweep(spec_mod16):
    """Full-scale sweep on the modified preset, with bound overlay (~3.5 min)."""
    cfg = SweepConfig(spec=spec_mod16, eps_grid=ACCEPTANCE_GRID,
                      s_window=ACCEPTANCE_WINDOW, bound_overlay=True)
    return run_sweep(cfg)


@pytest.fixture(scope="session")
def ledger_right(spec_rwa16):
    return build_ledger(spec_rwa16, 4, 20, "right")


@pytest.fixture(scope="session")
def ledger_left(spec_rwa16):
    return build_ledger(spec_rwa16, 4, 20, "left")

import numpy as np
import pytest

from gwann.aquifer import (
    AquiferModel,
    BoundaryConditions,
    GridSpec,
    HeadSegment,
    StressSchedule,
    TransportParams,
    ZoneMap,
    ZoneRect,
    default_model,
)
from gwann.flow import solve_steady_flow
from gwann.transport import TransportSimulator


def strip_model(
    n_cols=20,
    hk=(1e-4,),
    heads=(10.0, 0.0),
    dx=100.0,
    b=10.0,
    phi=0.3,
    alpha_L=10.0,
    alpha_T=1.0,
    sources=(),
    wells=(),
    n_periods=4,
    period_length=6.0,
    observation_times=(24.0,),
    max_courant=1.0,
    n_rows=1,
):
    """Rectangular strip with fixed heads on the first and last column.

    ``hk`` is split into equal-length consecutive zones along the strip.
    """
    k = len(hk)
    edges = np.linspace(0, n_cols, k + 1).round().astype(int)
    rects = tuple(ZoneRect(z + 1, (0, n_rows - 1), (int(edges[z]), int(edges[z + 1]) - 1)) for z in range(k))
    return AquiferModel(
        grid=GridSpec(n_rows, n_cols, dx, dx, b),
        zones=ZoneMap({z + 1: float(v) for z, v in enumerate(hk)}, rects),
        boundaries=BoundaryConditions(
            (
                HeadSegment("left", (0, n_rows - 1), (0, 0), heads[0]),
                HeadSegment("right", (0, n_rows - 1), (n_cols - 1, n_cols - 1), heads[1]),
            )
        ),
        sources=tuple(sources),
        wells=tuple(wells),
        schedule=StressSchedule(n_periods, period_length, tuple(observation_times)),
        transport=TransportParams(phi, alpha_L, alpha_T, 0.0, max_courant),
        name="strip",
    )


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def flow(model):
    return solve_steady_flow(model)


@pytest.fixture(scope="session")
def simulator(model, flow):
    return TransportSimulator(model, flow)


@pytest.fixture
def make_strip():
    return strip_model



# One summary line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

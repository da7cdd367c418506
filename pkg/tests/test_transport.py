import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import strip_model
from gwann.aquifer import SECONDS_PER_MONTH, SourceSpec, WellSpec
from gwann.flow import solve_steady_flow
from gwann.transport import (
    ObservationVector,
    ReleaseHistory,
    TransportError,
    TransportSimulator,
    directional_diffusivities,
    dispersion_tensor,
    export_snapshots,
    observation_labels,
    release_labels,
    simulate_transport,
    superposition_check,
)

GOLDEN = [35, 90, 65, 47, 24, 56, 43, 35]


# dispersion tensor ------------------------------------------------------------


def test_axis_aligned_tensor():
    d = dispersion_tensor(np.array([1.0, 0.0]), 40.0, 4.0)
    np.testing.assert_allclose(d, np.diag([40.0, 4.0]))


def test_zero_velocity_tensor():
    assert np.all(dispersion_tensor(np.zeros((3, 4, 2)), 40.0, 4.0) == 0)


def test_diagonal_velocity_eigenpairs():
    u = np.array([1.0, 1.0]) / np.sqrt(2)
    d = dispersion_tensor(u, 40.0, 4.0)
    w, v = np.linalg.eigh(d)
    np.testing.assert_allclose(w, [4.0, 40.0])
    assert abs(abs(v[:, 1] @ u) - 1) < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    ux=st.floats(-1e-3, 1e-3),
    uy=st.floats(-1e-3, 1e-3),
    al=st.floats(0.0, 100.0),
    ratio=st.floats(0.0, 1.0),
)
def test_tensor_symmetric_psd(ux, uy, al, ratio):
    d = dispersion_tensor(np.array([ux, uy]), al, al * ratio)
    np.testing.assert_allclose(d, d.T)
    speed = np.hypot(ux, uy)
    w = np.linalg.eigvalsh(d)
    assert w.min() >= -1e-12 * max(speed * al, 1e-300)
    if speed > 0:
        np.testing.assert_allclose(sorted(w), sorted([al * ratio * speed, al * speed]), rtol=1e-9, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    angle=st.floats(0.0, 2 * np.pi),
    al=st.floats(1.0, 100.0),
    at_ratio=st.floats(0.05, 1.0),
    m=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    dz=st.floats(50.0, 200.0),
    de=st.floats(50.0, 200.0),
)
def test_nine_point_split_reproduces_tensor(angle, al, at_ratio, m, dz, de):
    # On a quadratic field C = x^T M x / 2 the stencil must give tr(D M)
    # whenever the cross term needs no limiting.
    u = np.array([np.cos(angle), np.sin(angle)]) * 1e-5
    d = dispersion_tensor(u, al, al * at_ratio)
    a_z, a_e, a_pp, a_pm = directional_diffusivities(d, dz, de)
    assert min(a_z, a_e, a_pp, a_pm) >= 0
    M = np.array([[m[0], m[1]], [m[1], m[2]]])
    L2 = dz * dz + de * de
    stencil = a_z * M[0, 0] + a_e * M[1, 1]
    stencil += a_pp / L2 * np.array([dz, de]) @ M @ np.array([dz, de])
    stencil += a_pm / L2 * np.array([dz, -de]) @ M @ np.array([dz, -de])
    limit = min(d[0, 0] * de / dz, d[1, 1] * dz / de)
    if abs(d[0, 1]) <= limit:
        assert stencil == pytest.approx(np.trace(d @ M), rel=1e-9, abs=1e-18)


# simulation on the default model ----------------------------------------------


def test_zero_release_gives_zero(simulator, model):
    obs = simulator.observe(np.zeros(model.n_release_values))
    assert obs.shape == (35,)
    assert np.all(obs == 0)


def test_observation_layout(model, simulator):
    res = simulator.run(ReleaseHistory.from_vector(model, GOLDEN))
    assert isinstance(res.observations, ObservationVector)
    assert len(res.observations) == 35
    assert res.observations.as_matrix().shape == (7, 5)
    labels = observation_labels(model)
    assert labels[:6] == ["W1_t12", "W1_t24", "W1_t36", "W1_t48", "W1_t60", "W2_t12"]
    assert release_labels(model) == ["S1_p1", "S1_p2", "S1_p3", "S1_p4", "S2_p1", "S2_p2", "S2_p3", "S2_p4"]


def test_mass_balance_default(model, simulator):
    res = simulator.run(ReleaseHistory.from_vector(model, GOLDEN))
    assert res.mass_balance.relative_error < 0.005
    assert res.mass_balance.relative_error < 1e-10
    assert res.mass_balance.injected == pytest.approx(sum(GOLDEN) * 6 * SECONDS_PER_MONTH)


def test_non_negative(model, simulator):
    res = simulator.run(ReleaseHistory.from_vector(model, GOLDEN), snapshots=True)
    assert res.min_concentration >= -1e-9 * res.max_concentration
    for grid in res.snapshots.values():
        assert grid.min() >= -1e-9 * res.max_concentration


def test_snapshots_at_observation_times(model, simulator, tmp_path):
    res = simulator.run(ReleaseHistory.from_vector(model, GOLDEN), snapshots=True)
    assert len(res.snapshots) == 5
    paths = export_snapshots(res, tmp_path)
    assert len(paths) == 5
    last = max(res.snapshots)
    wells = [res.snapshots[last][w.cell] for w in model.wells]
    np.testing.assert_array_equal(wells, res.observations.as_matrix()[:, -1])


def test_release_length_mismatch(model, simulator):
    with pytest.raises(TransportError):
        ReleaseHistory.from_vector(model, [1.0, 2.0])
    with pytest.raises(TransportError):
        simulator.run(ReleaseHistory({"S1": (1.0,), "S2": (1.0, 1.0, 1.0, 1.0)}))


def test_superposition_and_scaling(model, flow):
    r1 = ReleaseHistory.from_vector(model, GOLDEN)
    r2 = ReleaseHistory.from_vector(model, [0, 0, 10, 0, 5, 0, 0, 0])
    assert superposition_check(model, flow, r1, r2)
    assert superposition_check(model, flow, r1, ReleaseHistory.zeros(model))
    sim = TransportSimulator(model, flow)
    np.testing.assert_allclose(sim.observe(2 * np.array(GOLDEN, float)), 2 * sim.observe(GOLDEN), rtol=1e-10)


def test_disjoint_pulses_superpose(model, flow):
    p1 = ReleaseHistory.from_vector(model, [10, 0, 0, 0, 0, 0, 0, 0])
    p2 = ReleaseHistory.from_vector(model, [0, 0, 0, 0, 0, 0, 0, 20])
    assert superposition_check(model, flow, p1, p2)


@settings(max_examples=15, deadline=None)
@given(
    a=st.lists(st.floats(0, 100), min_size=8, max_size=8),
    b=st.lists(st.floats(0, 100), min_size=8, max_size=8),
)
def test_linearity_property(simulator, a, b):
    oa, ob, oab = simulator.observe(a), simulator.observe(b), simulator.observe(np.add(a, b))
    scale = max(np.abs(oab).max(), 1e-300)
    assert np.abs(oab - oa - ob).max() <= 1e-8 * scale


def test_simulate_transport_matches_simulator(model, flow, simulator):
    r = ReleaseHistory.from_vector(model, GOLDEN)
    np.testing.assert_array_equal(simulate_transport(model, flow, r).observations.values, simulator.run(r).observations.values)


def test_release_history_helpers(model):
    r = ReleaseHistory.from_vector(model, GOLDEN)
    np.testing.assert_array_equal(r.vector(model), GOLDEN)
    np.testing.assert_array_equal((r + r).vector(model), 2 * np.array(GOLDEN))
    np.testing.assert_array_equal(r.scaled(0.5).vector(model), 0.5 * np.array(GOLDEN))


def test_substeps_respect_courant(simulator):
    for period, dt, n_sub, observe, t_end in simulator._segments:
        assert dt <= simulator.max_substep * (1 + 1e-12)


# quasi-1D oracle ----------------------------------------------------------------


def _uniform_strip(v_target, dx=5.0, n=160, alpha_L=20.0, src=20, well=60, months=12.0, max_courant=0.2, n_periods=4):
    k, phi = 1e-4, 0.3
    length = (n - 1) * dx
    dh = v_target * length * phi / k
    return strip_model(
        n_cols=n,
        hk=(k,),
        heads=(dh, 0.0),
        dx=dx,
        b=10.0,
        phi=phi,
        alpha_L=alpha_L,
        alpha_T=alpha_L / 10,
        sources=(SourceSpec("S1", (0, src), tuple(range(n_periods))),),
        wells=(WellSpec("W1", (0, well)),),
        n_periods=n_periods,
        period_length=6.0,
        observation_times=(months,),
        max_courant=max_courant,
    )


def _ade_point_source(x, t, v, D, rate, phi, area):
    """Continuous point injection into an infinite 1D column (closed form integral)."""
    g = lambda tau: np.exp(-((x - v * tau) ** 2) / (4 * D * tau)) / np.sqrt(4 * np.pi * D * tau)
    val, _ = quad(g, 0.0, t, limit=200, points=[x / v])
    return rate / (phi * area) * val


def test_breakthrough_matches_1d_solution_at_mid_breakthrough():
    dx, src, well = 5.0, 20, 60
    distance = (well - src) * dx
    months = 12.0
    v = distance / (months * SECONDS_PER_MONTH)  # front reaches the well at the observation time
    m = _uniform_strip(v, dx=dx, src=src, well=well, months=months)
    f = solve_steady_flow(m)
    np.testing.assert_allclose(f.velocity[0, 1:-1, 0], v, rtol=1e-9)
    rate = 2.0
    c_num = TransportSimulator(m, f).observe([rate] * 4)[0]
    t = months * SECONDS_PER_MONTH
    c_ref = _ade_point_source(distance, t, v, m.transport.alpha_L * v, rate, m.transport.porosity_phi, 10.0 * dx)
    assert c_num == pytest.approx(c_ref, rel=0.10)


def test_time_ordering_far_downstream():
    # At a tenth of the advective travel time a downstream well is still clean.
    dx, src, well = 5.0, 20, 140
    v = 1e-5
    t_adv = (well - src) * dx / v
    months = 0.1 * t_adv / SECONDS_PER_MONTH
    m = _uniform_strip(v, dx=dx, n=170, src=src, well=well, months=months, max_courant=0.5)
    f = solve_steady_flow(m)
    sim = TransportSimulator(m, f)
    res = sim.run(ReleaseHistory.from_vector(m, [1.0] * 4))
    assert res.observations.values[0] <= 1e-6 * res.max_concentration


def test_mass_balance_strip_with_outflow():
    m = _uniform_strip(2e-5, n=60, src=10, well=40, months=24.0)
    f = solve_steady_flow(m)
    res = TransportSimulator(m, f).run(ReleaseHistory.from_vector(m, [1.0, 3.0, 0.0, 2.0]))
    mb = res.mass_balance
    assert mb.outflow > 0
    assert mb.relative_error < 0.005

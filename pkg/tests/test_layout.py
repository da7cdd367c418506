import numpy as np
import pytest

from gwann.layout import (
    EXPECTED_DIMS,
    LayoutError,
    ScenarioConfig,
    SimulationBatch,
    build_io_vectors,
    cell_to_location,
    corrupt_observations,
    decode_location,
    final_time_columns,
    golden_model,
    inv2_candidates,
    near_zero_mask,
    reduce_near_zero_columns,
    sample_alpha_and_noise,
)
from gwann.sampling import Dataset
from gwann.transport import ObservationVector


def test_corruption_zero_alpha_is_identity():
    x = np.array([1.0, 5.0, 0.0])
    np.testing.assert_array_equal(corrupt_observations(x, 0.0, seed=1), x)


def test_corruption_forced_eps():
    assert corrupt_observations(np.array([50.0]), 0.1, eps=1.0)[0] == pytest.approx(55.0)


def test_corruption_relative_std():
    alpha = 0.01
    out = corrupt_observations(np.ones(100_000), alpha, seed=123)
    s = np.std(out - 1.0, ddof=1)
    assert 0.99 * alpha <= s <= 1.01 * alpha


def test_corruption_deterministic_and_keeps_type():
    ov = ObservationVector(np.array([1.0, 2.0]), ("W1",), (12.0, 24.0))
    a = corrupt_observations(ov, 0.1, seed=9)
    b = corrupt_observations(ov, 0.1, seed=9)
    assert isinstance(a, ObservationVector)
    np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(LayoutError):
        corrupt_observations(ov, -0.1)


def test_near_zero_reduction():
    X = np.array([[0.0, 1.0, 1e-6, 3.0], [0.0, 2.0, 2e-6, 4.0]])
    mask = near_zero_mask(X, 1e-4)
    assert mask.tolist() == [False, True, False, True]
    ds = Dataset(X, np.ones((2, 1)), ["a", "b", "c", "d"], ["t"])
    red, m = reduce_near_zero_columns(ds, 1e-4)
    assert red.input_labels == ["b", "d"] and red.metadata["input_mask"] == m.tolist()
    full, m2 = reduce_near_zero_columns(Dataset(X[:, 1:2], np.ones((2, 1)), ["b"], ["t"]))
    assert m2.all() and full.inputs.shape == (2, 1)
    with pytest.raises(LayoutError):
        near_zero_mask(np.zeros((2, 3)), 1e-4)


def test_default_inv3_dataset_drop_count(model):
    from gwann.sampling import generate_dataset

    ds = generate_dataset(model, ScenarioConfig("INV3", n_samples=100))
    _, mask = reduce_near_zero_columns(ds, 1e-4)
    # every well sees some plume on the default geometry, so nothing is dropped
    assert int((~mask).sum()) == 0


def test_config_validation():
    assert ScenarioConfig("inv1").kind == "INV1"
    assert ScenarioConfig("INV2").n_samples == 2304
    with pytest.raises(LayoutError):
        ScenarioConfig("INV9")
    with pytest.raises(LayoutError):
        ScenarioConfig("INV1", alpha=-1)
    with pytest.raises(LayoutError):
        ScenarioConfig("INV2", n_samples=100)


def test_config_dict_round_trip():
    cfg = ScenarioConfig("INV2", alpha=0.1, inv2_candidates=((3, 3),) * 9, dataset_seed=4)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg


def _batch(model, n=3, locations=None):
    rng = np.random.default_rng(0)
    return SimulationBatch(rng.uniform(1, 2, (n, model.n_release_values)), rng.uniform(1, 2, (n, model.n_observations)), locations)


@pytest.mark.parametrize("kind", ["FWD1", "INV1", "INV2", "INV3", "INV4"])
def test_layout_dimensions(model, kind):
    cfg = ScenarioConfig(kind)
    gm = golden_model(model, cfg)
    b = _batch(gm, locations=np.tile([4.0, 4.0], (3, 1)))
    X, Y, li, lo = build_io_vectors(kind, b, gm)
    assert (X.shape[1], Y.shape[1]) == EXPECTED_DIMS[kind]
    assert len(li) == X.shape[1] and len(lo) == Y.shape[1]


def test_fwd1_target_order_is_well_major(model):
    cfg = ScenarioConfig("FWD1")
    gm = golden_model(model, cfg)
    b = _batch(gm)
    _, Y, _, lo = build_io_vectors("FWD1", b, gm)
    np.testing.assert_array_equal(Y, b.observations)
    assert lo[:5] == ["W1_t12", "W1_t24", "W1_t36", "W1_t48", "W1_t60"]


def test_inv1_uses_final_year(model):
    cfg = ScenarioConfig("INV1")
    gm = golden_model(model, cfg)
    b = _batch(gm)
    X, _, li, _ = build_io_vectors("INV1", b, gm)
    np.testing.assert_array_equal(final_time_columns(gm), [4, 9, 14, 19, 24, 29, 34])
    assert all(lab.endswith("_t60") for lab in li)
    np.testing.assert_array_equal(X, b.observations[:, 4::5])


def test_inv2_targets_end_with_location(model):
    cfg = ScenarioConfig("INV2")
    gm = golden_model(model, cfg)
    loc = cell_to_location((4, 4))
    _, Y, _, lo = build_io_vectors("INV2", _batch(gm, 1, np.array([loc])), gm)
    assert lo[-2:] == ["zeta", "eta"]
    assert Y[0, -2:].tolist() == [4.0, 4.0]
    with pytest.raises(LayoutError):
        build_io_vectors("INV2", _batch(gm), gm)


def test_inv4_alpha_target_matches_corruption(model):
    cfg = ScenarioConfig("INV4")
    gm = golden_model(model, cfg)
    b = _batch(gm, n=40)
    X, Y, _, lo = build_io_vectors("INV4", b, gm, seed=5)
    assert lo[-1] == "alpha"
    assert set(Y[:, -1]) <= {0.0, 0.001, 0.01, 0.1}
    for i in range(40):
        alpha, eps = sample_alpha_and_noise(i, 5, gm.n_observations)
        assert Y[i, -1] == alpha
        np.testing.assert_array_equal(X[i], b.observations[i] + alpha * eps * b.observations[i])


def test_layout_mismatch(model):
    gm = golden_model(model, ScenarioConfig("INV1"))
    with pytest.raises(LayoutError):
        build_io_vectors("INV1", SimulationBatch(np.ones((2, 3)), np.ones((2, 35))), gm)


def test_inv2_candidates(model):
    cells = inv2_candidates(model, (4, 4))
    assert sorted(cells) == [(r, c) for r in (3, 4, 5) for c in (3, 4, 5)]
    explicit = [(1, 1), (2, 2), (3, 3), (1, 2), (2, 1), (5, 5), (6, 6), (7, 7), (1, 3)]
    assert inv2_candidates(model, (4, 4), explicit) == explicit
    with pytest.raises(LayoutError):
        inv2_candidates(model, (0, 0))


def test_decode_location():
    cands = [cell_to_location(c) for c in inv2_candidates_block()]
    assert decode_location(4.02, 3.83, cands) == (4, 4)
    assert decode_location(3.0, 5.0, cands) == (3, 5)
    assert decode_location(3.5, 4.0, cands) == (3, 4)
    assert decode_location(100.0, -100.0, cands) == (5, 3)
    with pytest.raises(LayoutError):
        decode_location(1, 1, [])


def inv2_candidates_block():
    return [(r, c) for r in (3, 4, 5) for c in (3, 4, 5)]

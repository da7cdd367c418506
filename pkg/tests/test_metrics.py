import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwann.metrics import MetricError, mae, me, metric_report, ne, nrmse, paee, render_csv, render_table, rmse, sd_t

S2_ACTUAL = [24, 56, 43, 35]
S2_EST = [23.61, 56.88, 42.52, 35.16]


def test_ne_examples():
    assert ne(S2_ACTUAL, S2_EST) == pytest.approx(1.21, abs=0.005)
    assert ne(S2_ACTUAL, S2_EST) == pytest.approx(1.22, abs=0.03)
    assert ne(S2_ACTUAL, S2_ACTUAL) == 0
    full = ne([35, 90, 65, 47, 24, 56, 43, 35], [35, 89.2, 64.9, 47.3, 23.6, 58.3, 42.1, 35])
    assert full == pytest.approx(1.22, abs=0.005)
    assert full == pytest.approx(1.23, abs=0.03)


def test_paee_examples():
    assert paee(24, 23.61) == pytest.approx(1.63, abs=0.005)
    assert paee(24, 23.61) == pytest.approx(1.65, abs=0.03)
    assert paee(47, 49.29) == pytest.approx(4.87, abs=0.005)
    assert paee(47, 49.29) == pytest.approx(4.86, abs=0.03)
    assert paee(5, 5) == 0
    with pytest.raises(MetricError):
        paee(0, 1)


def test_sd_t_examples():
    assert sd_t([[1.0], [3.0]])[0] == pytest.approx(np.sqrt(2))
    assert sd_t([[2.0], [2.0], [2.0]])[0] == 0
    assert sd_t([[1.0], [2.0], [3.0], [4.0]])[0] == pytest.approx(1.2910, abs=1e-4)
    with pytest.raises(MetricError):
        sd_t([[1.0, 2.0]])


def test_error_statistics_examples():
    assert me([1, 1], [0, 2]) == 0
    assert mae([1, 1], [0, 2]) == 1
    assert rmse([1, 1], [0, 2]) == 1
    assert all(f([3, 4], [3, 4]) == 0 for f in (me, mae, rmse, nrmse))


def test_nrmse_against_reported_value():
    # RMSE 0.55 over an actual range of 24..56
    actual = np.array([24.0, 56.0])
    est = actual + 0.55
    assert nrmse(actual, est) == pytest.approx(1.72, abs=0.005)
    assert nrmse(actual, est) == pytest.approx(1.71, abs=0.03)
    with pytest.raises(MetricError):
        nrmse([2, 2], [1, 3])


def test_length_and_zero_sum_errors():
    with pytest.raises(MetricError):
        ne([1, 2], [1])
    with pytest.raises(MetricError):
        ne([0, 0], [1, 1])
    with pytest.raises(MetricError):
        me([], [])


pairs = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.1, 1e3), min_size=n, max_size=n),
        st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
    )
)


@given(pairs)
def test_power_mean_ordering(p):
    a, e = p
    assert rmse(a, e) >= mae(a, e) * (1 - 1e-12) - 1e-12
    assert mae(a, e) >= abs(me(a, e)) * (1 - 1e-12) - 1e-12


@given(pairs, st.randoms(use_true_random=False))
def test_permutation_invariance(p, rnd):
    a, e = p
    idx = list(range(len(a)))
    rnd.shuffle(idx)
    a2, e2 = [a[i] for i in idx], [e[i] for i in idx]
    assert ne(a2, e2) == pytest.approx(ne(a, e), rel=1e-12)
    if max(a) > min(a):
        assert nrmse(a2, e2) == pytest.approx(nrmse(a, e), rel=1e-12)


def test_metric_report_and_rendering():
    rng = np.random.default_rng(0)
    real = np.array(S2_EST) + rng.normal(0, 0.1, (10, 4))
    rep = metric_report(S2_ACTUAL, S2_EST, labels=["p1", "p2", "p3", "p4"], realizations=real, units="g/s")
    assert rep.ne_percent == pytest.approx(ne(S2_ACTUAL, S2_EST))
    assert len(rep.paee_percent) == 4 and len(rep.sd_t) == 4
    assert rep.mae >= abs(rep.me)
    text = render_table(rep, "releases")
    assert "p3" in text and "NRMSE" in text
    assert render_csv(rep).splitlines()[0].startswith("unknown,actual,estimated")
    d = rep.to_dict()
    assert d["units"] == "g/s"


def test_metric_report_degenerate_fields():
    rep = metric_report([0.0, 2.0], [0.1, 2.0])
    assert rep.paee_percent is None
    assert metric_report([2.0, 2.0], [2.0, 2.1]).nrmse_percent is None

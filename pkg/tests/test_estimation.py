import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistcov.errors import GridMismatchError
from persistcov.estimation import (
    EstimatorState,
    UpdateMessage,
    compute_overlap,
    correction_round1,
    correction_round2,
    exactness_region,
    propagate,
)
from persistcov.field import GridSpec, ScalarField, decay_accumulate

TWO = GridSpec((0.0, 0.0), 2.0, 1.0, 2, 1)
DELTA = -0.1
# (1 - e^-0.1) / 0.1, frozen from a 30-digit mpmath evaluation
ONE_PERIOD = 0.95162581964040427


def field(values, spec=TWO):
    return ScalarField(spec, np.asarray(values, dtype=float).reshape(spec.shape))


def run_period(est, d, steps=50, dt=0.02):
    for _ in range(steps):
        est = propagate(est, d, DELTA, dt)
    return est


def test_d_tilde_after_one_period():
    est = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    assert est.d_tilde.values[0, 0] == pytest.approx(ONE_PERIOD, rel=1e-13)
    assert est.d_tilde.values[0, 1] == 0.0
    assert np.array_equal(est.I_hat.values, est.d_tilde.values)


def test_zero_adf_pure_decay():
    est = EstimatorState.initial(field([0.3, 2.0]))
    out = propagate(est, ScalarField.zeros(TWO), DELTA, 0.5)
    assert np.allclose(out.I_hat.values, math.exp(-0.05) * np.array([[0.3, 2.0]]), rtol=1e-15)


def test_propagate_grid_mismatch():
    with pytest.raises(GridMismatchError):
        propagate(EstimatorState.initial(ScalarField.zeros(TWO)),
                  ScalarField.zeros(GridSpec((0, 0), 1, 1, 1, 1)), DELTA, 0.1)


def test_single_agent_tracks_truth():
    rng = np.random.default_rng(0)
    spec = GridSpec((0.0, 0.0), 5.0, 5.0, 5, 5)
    I = ScalarField.zeros(spec)
    est = EstimatorState.initial(I)
    for k in range(500):
        d = field(rng.uniform(0, 3, 25) * (rng.random(25) < 0.3), spec)
        I = decay_accumulate(I, d, DELTA, 0.02)
        est = propagate(est, d, DELTA, 0.02)
        if (k + 1) % 50 == 0:
            I_minus = correction_round1(est, [], DELTA, 1.0)
            est = correction_round2(est, I_minus, [], (k + 1) * 0.02)
        assert np.max(np.abs(est.I_hat.values - I.values)) < 1e-12


def _two_cell_round1():
    a = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    b = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([0.0, 1.0]))
    ma, mb = UpdateMessage(0, a.I_hat), UpdateMessage(1, b.I_hat)
    return a, b, ma, mb


def test_two_cell_round1():
    a, b, ma, mb = _two_cell_round1()
    Ia = correction_round1(a, [mb], DELTA, 1.0)
    assert np.allclose(Ia.values, ONE_PERIOD, rtol=0, atol=1e-12)


def test_two_cell_overlap_is_empty():
    a, b, ma, mb = _two_cell_round1()
    assert np.all(compute_overlap(a, [mb], DELTA, 1.0).values == 0.0)
    assert np.all(compute_overlap(b, [ma], DELTA, 1.0).values == 0.0)


def test_two_cell_full_exchange():
    a, b, ma, mb = _two_cell_round1()
    Ia = correction_round1(a, [mb], DELTA, 1.0)
    Ib = correction_round1(b, [ma], DELTA, 1.0)
    oa = compute_overlap(a, [mb], DELTA, 1.0)
    ob = compute_overlap(b, [ma], DELTA, 1.0)
    na = correction_round2(a, Ia, [UpdateMessage(1, b.I_hat, ob)], 1.0)
    nb = correction_round2(b, Ib, [UpdateMessage(0, a.I_hat, oa)], 1.0)
    for est in (na, nb):
        assert np.allclose(est.I_hat.values, ONE_PERIOD, rtol=0, atol=1e-12)
        assert np.all(est.d_tilde.values == 0.0)
        assert np.array_equal(est.last_snapshot.values, est.I_hat.values)
        assert est.t_last == 1.0


def test_round1_without_neighbours_is_identity():
    a, *_ = _two_cell_round1()
    assert np.allclose(correction_round1(a, [], DELTA, 1.0).values, a.I_hat.values, rtol=0, atol=1e-15)


def test_round1_ignores_lower_neighbour_outside_own_support():
    est = EstimatorState(field([0.0, 0.5]), field([0.2, 0.0]), field([0.0, 0.5]), 0.0)
    low = UpdateMessage(1, field([0.0, 0.1]))
    out = correction_round1(est, [low], 0.0, 1.0)
    assert out.values[0, 1] == 0.5


def test_round1_requires_snapshot():
    est = EstimatorState(ScalarField.zeros(TWO), ScalarField.zeros(TWO), None)
    with pytest.raises(ValueError):
        correction_round1(est, [], DELTA, 1.0)


def test_colocated_overlap_equals_own_contribution():
    a = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    b = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    o = compute_overlap(a, [UpdateMessage(1, b.I_hat)], DELTA, 1.0)
    assert np.array_equal(o.values, a.d_tilde.values)
    assert np.all(compute_overlap(a, [], DELTA, 1.0).values == 0.0)


def test_colocated_pair_recovers_double_coverage():
    a = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    b = run_period(EstimatorState.initial(ScalarField.zeros(TWO)), field([1.0, 0.0]))
    c = EstimatorState.initial(ScalarField.zeros(TWO))
    c = run_period(c, ScalarField.zeros(TWO))
    msgs = [UpdateMessage(0, a.I_hat), UpdateMessage(1, b.I_hat)]
    I_c = correction_round1(c, msgs, DELTA, 1.0)
    o = [compute_overlap(e, [m for m in msgs if m.sender != k] + [UpdateMessage(2, c.I_hat)], DELTA, 1.0)
         for k, e in enumerate((a, b))]
    out = correction_round2(c, I_c, [UpdateMessage(k, msgs[k].I_hat_snapshot, o[k]) for k in range(2)])
    assert out.I_hat.values[0, 0] == pytest.approx(2 * ONE_PERIOD, abs=1e-12)
    I_a = correction_round1(a, [msgs[1]], DELTA, 1.0)
    assert I_a.values[0, 0] == pytest.approx(2 * ONE_PERIOD, abs=1e-12)


def test_round2_three_colocated_neighbours_add_twice():
    c = 0.37
    est = EstimatorState(field([1.0, 1.0]), field([0.5, 0.0]), field([1.0, 1.0]), 0.0)
    overlaps = [field([0.0, c]) for _ in range(3)]
    out = correction_round2(est, field([1.0, 1.0]), overlaps)
    assert out.I_hat.values[0, 1] == pytest.approx(1.0 + 2 * c, abs=1e-15)
    assert out.I_hat.values[0, 0] == 1.0  # own support is left alone


def test_round2_single_neighbour_is_identity():
    est = EstimatorState(field([1.0, 1.0]), field([0.5, 0.0]), field([1.0, 1.0]), 0.0)
    out = correction_round2(est, field([1.0, 0.8]), [field([0.0, 0.3])])
    assert np.array_equal(out.I_hat.values, [[1.0, 0.8]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(1, 3))
def test_disjoint_supports_restore_truth(seed, n_agents, periods):
    """With exact estimates at the start and disjoint footprints during the
    period, both rounds recover the true field."""
    rng = np.random.default_rng(seed)
    spec = GridSpec((0.0, 0.0), 12.0, 1.0, 12, 1)
    owner = rng.integers(-1, n_agents, 12)  # -1: nobody covers the cell
    I = ScalarField(spec, rng.uniform(0, 2, spec.shape))
    ests = [EstimatorState.initial(I) for _ in range(n_agents)]
    dt, steps = 0.1, 10
    for p in range(periods):
        for _ in range(steps):
            ds = [field(np.where(owner == i, rng.uniform(0, 3, 12), 0.0), spec) for i in range(n_agents)]
            I = decay_accumulate(I, field(sum(d.values for d in ds), spec), DELTA, dt)
            ests = [propagate(e, d, DELTA, dt) for e, d in zip(ests, ds)]
        snaps = [UpdateMessage(i, e.I_hat) for i, e in enumerate(ests)]
        inbox = [[s for s in snaps if s.sender != i] for i in range(n_agents)]
        I_minus = [correction_round1(e, inbox[i], DELTA, 1.0) for i, e in enumerate(ests)]
        overlaps = [compute_overlap(e, inbox[i], DELTA, 1.0) for i, e in enumerate(ests)]
        ests = [correction_round2(e, I_minus[i], [o for j, o in enumerate(overlaps) if j != i], (p + 1) * 1.0)
                for i, e in enumerate(ests)]
        for e in ests:
            assert np.max(np.abs(e.I_hat.values - I.values)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_estimates_never_exceed_truth(seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec((0.0, 0.0), 8.0, 1.0, 8, 1)
    n = 3
    I = ScalarField.zeros(spec)
    ests = [EstimatorState.initial(I) for _ in range(n)]
    for p in range(3):
        for _ in range(10):
            ds = [field(rng.uniform(0, 2, 8) * (rng.random(8) < 0.5), spec) for _ in range(n)]
            I = decay_accumulate(I, field(sum(d.values for d in ds), spec), DELTA, 0.1)
            ests = [propagate(e, d, DELTA, 0.1) for e, d in zip(ests, ds)]
            for e in ests:
                assert np.all(e.I_hat.values <= I.values + 1e-9)
        snaps = [UpdateMessage(i, e.I_hat) for i, e in enumerate(ests)]
        inbox = [[s for s in snaps if s.sender != i] for i in range(n)]
        I_minus = [correction_round1(e, inbox[i], DELTA, 1.0) for i, e in enumerate(ests)]
        ov = [compute_overlap(e, inbox[i], DELTA, 1.0) for i, e in enumerate(ests)]
        ests = [correction_round2(e, I_minus[i], [o for j, o in enumerate(ov) if j != i]) for i, e in enumerate(ests)]
        for e in ests:
            assert np.all(e.I_hat.values <= I.values + 1e-9)


@pytest.mark.parametrize("R_com, r_cov, N, ell, expected", [
    (150.0, 3.4641016151377546, 6, 2.0, 136.53589838486224),
    (150.0, 5.0, 1, 40.0, 145.0),
    (10.0, 5.0, 4, 3.0, -4.0),
])
def test_exactness_region(R_com, r_cov, N, ell, expected):
    assert exactness_region(R_com, r_cov, N, ell) == pytest.approx(expected, rel=1e-14)

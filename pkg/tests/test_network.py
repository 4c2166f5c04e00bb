import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistcov.descriptor import Gaussian, Pose
from persistcov.estimation import EstimatorState, propagate
from persistcov.field import GridSpec, ScalarField
from persistcov.network import (
    CommsConfig,
    ExchangeStats,
    ProximityGraph,
    connectivity_check,
    exchange_estimates,
    exchange_fast,
    neighbors,
)

ONE_PERIOD = 0.95162581964040427
G = Gaussian(3.0, (3.0, 3.0))


def graph(*positions, R_com=150.0):
    return ProximityGraph.from_poses([Pose(x, y, 0.0) for x, y in positions], R_com)


@pytest.mark.parametrize("b, expected", [((100.0, 0.0), {1}), ((200.0, 0.0), set())])
def test_neighbors_by_range(b, expected):
    g = graph((0.0, 0.0), b)
    assert neighbors(g, 0) == expected


def test_unknown_id():
    with pytest.raises(KeyError):
        neighbors(graph((0.0, 0.0)), 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=1, max_size=8))
def test_graph_symmetric_and_complete_in_area(points):
    g = graph(*points)
    for i in range(g.size):
        assert i not in neighbors(g, i)
        for j in neighbors(g, i):
            assert i in neighbors(g, j)
        # 100 * sqrt(2) < 150
        assert len(neighbors(g, i)) == g.size - 1


@pytest.mark.parametrize("positions, connected", [
    ([(0, 0), (10, 0), (20, 0)], True),
    ([(0, 0), (500, 0)], False),
    ([(0, 0), (100, 0), (200, 0)], True),  # chain
    ([(0, 0)], True),
    ([], True),
])
def test_connectivity(positions, connected):
    assert connectivity_check(graph(*positions)) is connected


def test_fast_exchange_views():
    poses = [Pose(0, 0, 0), Pose(10, 0, 0), Pose(500, 0, 0)]
    g = ProximityGraph.from_poses(poses, 150.0)
    views = exchange_fast(poses, [G] * 3, g)
    assert [nb.agent_id for nb in views[0]] == [1]
    assert views[2] == []
    poses[1] = Pose(99, 99, 0)
    assert views[0][0].pose == Pose(10, 0, 0)


def test_footprint_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert not CommsConfig(8.0, 1.0).check_footprint(5.0)
    assert "R_com" in caplog.text
    assert CommsConfig(150.0, 1.0).check_footprint(5.0)


@pytest.mark.parametrize("R_com, T", [(0.0, 1.0), (10.0, 0.0)])
def test_comms_validated(R_com, T):
    with pytest.raises(ValueError):
        CommsConfig(R_com, T)


TWO = GridSpec((0.0, 0.0), 2.0, 1.0, 2, 1)


def _period(d):
    est = EstimatorState.initial(ScalarField.zeros(TWO))
    for _ in range(50):
        est = propagate(est, ScalarField(TWO, np.array([d])), -0.1, 0.02)
    return est


def test_two_cell_exchange_end_to_end():
    ests = [_period([1.0, 0.0]), _period([0.0, 1.0])]
    stats = ExchangeStats()
    out = exchange_estimates(ests, graph((0.5, 0.5), (1.5, 0.5)), 1.0, -0.1, stats, T=1.0)
    for est in out:
        assert np.allclose(est.I_hat.values, ONE_PERIOD, rtol=0, atol=1e-12)
        assert est.t_last == 1.0
    assert stats.messages == 4
    assert stats.bytes == 2 * 2 * TWO.nx * TWO.ny * 8


def test_disconnected_pair_keeps_own_view():
    ests = [_period([1.0, 0.0]), _period([0.0, 1.0])]
    out = exchange_estimates(ests, graph((0.5, 0.5), (1.5, 0.5), R_com=0.5), 1.0, -0.1)
    for est, before in zip(out, ests):
        assert np.allclose(est.I_hat.values, before.I_hat.values, rtol=0, atol=1e-15)
        assert np.all(est.d_tilde.values == 0.0)


def test_single_agent_exchange_resets():
    est = _period([1.0, 0.5])
    (out,) = exchange_estimates([est], graph((0.5, 0.5)), 1.0, -0.1)
    assert np.allclose(out.I_hat.values, est.I_hat.values, rtol=0, atol=1e-15)
    assert np.array_equal(out.last_snapshot.values, out.I_hat.values)
    assert np.all(out.d_tilde.values == 0.0)


def test_exchange_does_not_mutate_inputs():
    ests = [_period([1.0, 0.0]), _period([0.0, 1.0])]
    copies = [e.copy() for e in ests]
    exchange_estimates(ests, graph((0.5, 0.5), (1.5, 0.5)), 1.0, -0.1)
    for a, b in zip(ests, copies):
        assert np.array_equal(a.I_hat.values, b.I_hat.values)
        assert np.array_equal(a.d_tilde.values, b.d_tilde.values)

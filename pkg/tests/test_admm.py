import numpy as np
import pytest

from cogniot import synthetic
from cogniot.admm import (
    AdmmConfig,
    AgentObjective,
    ConsensusDivergence,
    ConsensusState,
    Topology,
    admm_step,
    run_consensus,
    x_update,
    y_update,
    z_update_central,
    z_update_neighbor,
)


def normal_equations(blocks):
    lhs = sum(B.T @ B for B, _ in blocks)
    rhs = sum(B.T @ b for B, b in blocks)
    return np.linalg.solve(lhs, rhs)


class TestXUpdate:
    def test_at_minimum(self):
        obj = AgentObjective.scalar_quadratic(1.7)
        np.testing.assert_allclose(x_update(obj, [1.7], [0.0], 1.0), [1.7], atol=1e-15)

    def test_zero_function_is_prox_identity(self):
        obj = AgentObjective.quadratic(np.zeros((0, 3)), np.zeros(0))
        z = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(x_update(obj, z, np.zeros(3), 0.7), z, atol=1e-15)

    def test_hand_minimization(self):
        # argmin (x - 4)^2 + x^2
        assert x_update(AgentObjective.scalar_quadratic(4.0), [0.0], [0.0], 2.0)[0] == pytest.approx(2.0, abs=1e-15)

    def test_quadratic_first_order_condition(self):
        rng = np.random.default_rng(0)
        B, b = rng.normal(size=(6, 3)), rng.normal(size=6)
        z, y, mu = rng.normal(size=3), rng.normal(size=3), 1.3
        x = x_update(AgentObjective.quadratic(B, b), z, y, mu)
        grad = B.T @ (B @ x - b) + y + mu * (x - z)
        assert np.abs(grad).max() <= 1e-12

    def test_row_mismatch(self):
        with pytest.raises(ValueError):
            AgentObjective.quadratic(np.ones((3, 2)), np.ones(2))


class TestZUpdates:
    def test_single_agent(self):
        np.testing.assert_allclose(z_update_central([[1.0, 2.0]], [[2.0, 4.0]], 2.0), [2.0, 4.0])

    def test_mean_when_duals_zero(self):
        xs = [[1.0], [2.0], [6.0]]
        np.testing.assert_allclose(z_update_central(xs, [[0.0]] * 3, 1.0), [3.0])

    def test_hand_arithmetic(self):
        assert z_update_central([1.0, 3.0], [2.0, -2.0], 2.0)[0] == pytest.approx(2.0, abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            z_update_central([], [], 1.0)

    def test_neighbor_complete_matches_central(self):
        rng = np.random.default_rng(1)
        xs, ys = rng.normal(size=(2, 5, 3))
        msgs = {i: xs[i] + ys[i] / 0.8 for i in range(5)}
        topo = Topology.complete(5)
        central = z_update_central(list(xs), list(ys), 0.8)
        for i in range(5):
            np.testing.assert_allclose(z_update_neighbor(msgs, topo.neighbors(i)), central, atol=1e-15)

    def test_isolated_agent(self):
        topo = Topology(3, ((0, 1),))
        msgs = {0: np.array([1.0]), 1: np.array([2.0]), 2: np.array([7.5])}
        assert z_update_neighbor(msgs, topo.neighbors(2))[0] == 7.5

    def test_path_graph(self):
        topo = Topology.path(3)
        msgs = {0: np.array([0.0]), 1: np.array([3.0]), 2: np.array([6.0])}
        assert z_update_neighbor(msgs, topo.neighbors(1))[0] == 3.0
        assert z_update_neighbor(msgs, topo.neighbors(0))[0] == 1.5

    def test_reads_only_neighborhood(self):
        # a message outside the neighborhood is never looked up
        msgs = {0: np.array([0.0]), 1: np.array([3.0])}
        assert z_update_neighbor(msgs, [0, 1])[0] == 1.5
        with pytest.raises(KeyError):
            z_update_neighbor(msgs, [0, 1, 2])


class TestYUpdate:
    def test_unchanged_at_consensus(self):
        np.testing.assert_array_equal(y_update([2.0], [2.0], [0.3], 5.0), [0.3])

    def test_definition(self):
        assert y_update([2.0], [0.0], [0.0], 1.0)[0] == 2.0

    def test_hand_arithmetic(self):
        assert y_update([4.0], [2.0], [1.0], 0.5)[0] == 2.0


class TestTopology:
    def test_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            Topology(3, ((1, 1),))

    def test_neighbors_include_self(self):
        assert Topology.path(4).neighbors(2) == [1, 2, 3]

    def test_connectivity_reported(self):
        assert Topology.path(4).is_connected()
        assert not Topology(4, ((0, 1), (2, 3))).is_connected()

    def test_duplicate_edges_normalized(self):
        assert Topology(3, ((0, 1), (1, 0))).edges == ((0, 1),)


class TestRunConsensus:
    def test_single_agent(self):
        z, state = run_consensus([AgentObjective.scalar_quadratic(2.5)], Topology(1, ()))
        assert z[0] == pytest.approx(2.5, abs=1e-8) and state.converged

    def test_mean_of_scalars(self):
        objs = [AgentObjective.scalar_quadratic(c) for c in (1, 2, 3, 4, 5)]
        z, _ = run_consensus(objs, Topology.complete(5))
        assert z[0] == pytest.approx(3.0, abs=1e-6)

    def test_least_squares_oracle(self):
        blocks = synthetic.quadratic_agents(10, 5, 8, seed=0)
        z, state = run_consensus([AgentObjective.quadratic(B, b) for B, b in blocks], Topology.complete(10))
        assert state.converged
        np.testing.assert_allclose(z, normal_equations(blocks), rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("seed", range(50))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        n, N = int(rng.integers(1, 11)), int(rng.integers(1, 21))
        m = 2 * n + 5
        # scaled so that each B_i'B_i is close to the identity
        blocks = [(rng.normal(size=(m, n)) / np.sqrt(m), rng.normal(size=m)) for _ in range(N)]
        z, state = run_consensus([AgentObjective.quadratic(B, b) for B, b in blocks], Topology.complete(N), AdmmConfig(max_iters=500))
        assert state.converged
        oracle = normal_equations(blocks)
        assert np.linalg.norm(z - oracle) <= 1e-6 * np.linalg.norm(oracle)

    def test_complete_graph_trace_matches_central(self):
        blocks = synthetic.quadratic_agents(6, 3, 5, seed=3)
        objs = [AgentObjective.quadratic(B, b) for B, b in blocks]
        topo = Topology.complete(6)
        _, c = run_consensus(objs, topo, AdmmConfig(mode="central", max_iters=60), keep_history=True)
        _, n = run_consensus(objs, topo, AdmmConfig(mode="neighbor", max_iters=60), keep_history=True)
        assert len(c.history) == len(n.history)
        for hc, hn in zip(c.history, n.history):
            for a, b in zip(hc, hn):
                assert np.abs(a - b).max() <= 1e-12

    def test_fixed_point(self):
        objs = [AgentObjective.scalar_quadratic([1.0, -2.0]) for _ in range(4)]
        z = np.array([1.0, -2.0])
        state = ConsensusState(np.tile(z, (4, 1)), np.zeros((4, 2)), np.tile(z, (4, 1)))
        for mode in ("central", "neighbor"):
            nxt = admm_step(state, objs, Topology.path(4), AdmmConfig(mode=mode))
            for a, b in ((nxt.xs, state.xs), (nxt.ys, state.ys), (nxt.zs, state.zs)):
                assert np.abs(a - b).max() <= 1e-12

    def test_deterministic(self):
        blocks = synthetic.quadratic_agents(5, 4, 6, seed=9)
        objs = [AgentObjective.quadratic(B, b) for B, b in blocks]
        a, sa = run_consensus(objs, Topology.path(5), AdmmConfig(mode="neighbor", max_iters=40))
        b, sb = run_consensus(objs, Topology.path(5), AdmmConfig(mode="neighbor", max_iters=40))
        np.testing.assert_array_equal(a, b)
        assert sa.primal_residuals == sb.primal_residuals

    def test_neighbor_mode_reports_disagreement(self):
        objs = [AgentObjective.scalar_quadratic(c) for c in (0.0, 10.0, 20.0, 30.0)]
        zs, state = run_consensus(objs, Topology.path(4), AdmmConfig(mode="neighbor", max_iters=200))
        assert zs.shape == (4, 1)
        assert len(state.disagreements) == state.iteration
        assert all(d >= 0 for d in state.disagreements)

    def test_divergence(self):
        # residuals above the divergence limit on the first round
        objs = [AgentObjective.quadratic(np.array([[1.0]]), np.array([1e13]))]
        with pytest.raises(ConsensusDivergence, match="diverged"):
            run_consensus(objs, Topology(1, ()), AdmmConfig(max_iters=5))

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            run_consensus([AgentObjective.scalar_quadratic(1.0), AgentObjective.scalar_quadratic([1.0, 2.0])], Topology.complete(2))
        with pytest.raises(ValueError):
            run_consensus([AgentObjective.scalar_quadratic(1.0)], Topology.complete(2))

    def test_invalid_config(self):
        with pytest.raises(ValueError, match="mu"):
            AdmmConfig(mu=0)
        with pytest.raises(ValueError, match="mode"):
            AdmmConfig(mode="gossip")

import math

import numpy as np
import pytest

from packcount.dynamics import (
    ChainState,
    connect_states,
    diameter_bound,
    enumerate_packings,
    exact_tv_curve,
    glauber_step,
    initial_packing,
    is_irreducible,
    mixing_time,
    reversibility_error,
    run_chain,
    sample_packings,
    stationarity_error,
    transition_matrix,
)
from packcount.graphio import Instance
from packcount.packing import Packing, is_valid_packing
from packcount.testing import brute_force_packings, complete_instance, load_fixture, path_instance, random_regular_instance, star_instance
from packcount.utils import CapacityError, NoPerfectMatchingError, RegimeError


class TestInitialPacking:
    @pytest.mark.parametrize("fixture", ["single_vertex_q3", "single_edge_q3", "path3_q5", "triangle_q3", "star2_q5"])
    def test_valid(self, fixture, rng):
        inst = load_fixture(fixture)
        assert is_valid_packing(inst, initial_packing(inst))
        assert is_valid_packing(inst, initial_packing(inst, rng))

    def test_randomized_starts_differ(self):
        inst = star_instance(3, 8)
        starts = {initial_packing(inst, np.random.default_rng(s)).spins for s in range(5)}
        assert len(starts) > 1

    def test_failure(self):
        # K_4 with q = 2: vertex 2 sees both colors used at both indices
        inst = complete_instance(4, 2)
        with pytest.raises(NoPerfectMatchingError, match="Construction failed"):
            initial_packing(inst)


class TestChain:
    def test_steps_stay_valid(self, path3_q5, rng):
        state = ChainState(initial_packing(path3_q5, rng), 0, rng)
        for _ in range(50):
            state = glauber_step(path3_q5, state)
            assert is_valid_packing(path3_q5, state.packing)
        assert state.step == 50

    @staticmethod
    def _invalid_steps(inst, steps, seed):
        rng = np.random.default_rng(seed)
        state = ChainState(initial_packing(inst, rng), 0, rng)
        invalid = 0
        for _ in range(steps):
            state = glauber_step(inst, state)
            invalid += not is_valid_packing(inst, state.packing)
        return invalid, state

    def test_regular_graph_stays_valid(self):
        inst = random_regular_instance(8, 3, 8, np.random.default_rng(4))
        invalid, state = self._invalid_steps(inst, 2_000, 5)
        assert invalid == 0
        assert state.step == 2_000

    @pytest.mark.slow
    def test_regular_graph_stays_valid_long_run(self):
        inst = random_regular_instance(8, 3, 8, np.random.default_rng(6))
        invalid, _ = self._invalid_steps(inst, 100_000, 7)
        assert invalid == 0

    def test_run_chain(self, path3_q5, rng):
        state = run_chain(path3_q5, ChainState(initial_packing(path3_q5), 0, rng), 25)
        assert state.step == 25
        assert is_valid_packing(path3_q5, state.packing)

    def test_needs_rng(self, path3_q5):
        with pytest.raises(ValueError, match="random stream"):
            run_chain(path3_q5, ChainState(initial_packing(path3_q5)), 1)

    def test_sample_packings(self, path3_q5):
        a = sample_packings(path3_q5, 4, 10, 3)
        b = sample_packings(path3_q5, 4, 10, 3)
        assert a == b
        assert all(is_valid_packing(path3_q5, p) for p in a)

    def test_regime_warning(self, edge_q3):
        with pytest.warns(UserWarning, match="ergodicity regime"):
            sample_packings(edge_q3, 1, 1, 0)


class TestEnumeration:
    @pytest.mark.parametrize(
        "fixture, count",
        [
            ("single_vertex_q3", 6),
            ("single_vertex_q2", 2),
            ("single_edge_q2", 2),
            ("single_edge_q3", 12),
            ("single_edge_q4", 216),
            ("path3_q3", 24),
            ("triangle_q3", 12),
        ],
    )
    def test_counts(self, fixture, count):
        states = enumerate_packings(load_fixture(fixture))
        assert len(states) == count
        assert [p.spins for p in states] == sorted(p.spins for p in states)

    def test_against_bruteforce(self):
        inst = Instance(3, 3, [(0, 1), (1, 2)], [[0, 1, 2], [1, 2, 3], [0, 2, 4]])
        assert enumerate_packings(inst) == brute_force_packings(inst)

    def test_cap(self, edge_q4):
        with pytest.raises(CapacityError, match="state space"):
            enumerate_packings(edge_q4, cap=10)


class TestTransitionMatrix:
    @pytest.mark.parametrize("fixture", ["single_vertex_q3", "single_edge_q2", "single_edge_q3", "single_edge_q4", "path3_q3", "triangle_q3"])
    def test_uniform_is_stationary(self, fixture):
        states, P = transition_matrix(load_fixture(fixture))
        np.testing.assert_allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)
        assert stationarity_error(P) <= 1e-12
        assert reversibility_error(P) <= 1e-12
        assert P.shape == (len(states), len(states))

    def test_irreducible_in_regime(self, edge_q4):
        _, P = transition_matrix(edge_q4)
        assert is_irreducible(P)

    def test_reducible_below_regime(self, edge_q3):
        # the parity of both spins is preserved by every move
        _, P = transition_matrix(edge_q3)
        assert not is_irreducible(P)

    def test_frozen(self):
        _, P = transition_matrix(load_fixture("single_edge_q2"))
        np.testing.assert_allclose(P.toarray(), np.eye(2))


class TestConnectStates:
    def _check(self, inst, a, b):
        moves = connect_states(inst, a, b)
        current = a
        for t in moves:
            assert current.spins[t.vertex] == t.before
            current = current.replace(t.vertex, t.after)
            assert is_valid_packing(inst, current)
        assert current == b
        assert len(moves) <= (inst.max_degree + 1) * inst.n
        assert sum(t.weight for t in moves) <= diameter_bound(inst)

    def test_edge(self, edge_q4, rng):
        states = enumerate_packings(edge_q4)
        for _ in range(100):
            a, b = (states[int(k)] for k in rng.integers(len(states), size=2))
            self._check(edge_q4, a, b)

    def test_random_packings(self, rng):
        inst = path_instance(5, 6)
        for _ in range(20):
            a, b = sample_packings(inst, 2, 15, rng)
            self._check(inst, a, b)

    def test_star(self, rng):
        inst = star_instance(3, 8, kind="random", palette=10, rng=rng)
        for _ in range(10):
            a, b = sample_packings(inst, 2, 20, rng)
            self._check(inst, a, b)

    def test_regime(self, edge_q3):
        a = initial_packing(edge_q3)
        with pytest.raises(RegimeError, match="2\\*Delta\\+2"):
            connect_states(edge_q3, a, a)

    def test_invalid(self, edge_q4):
        a = initial_packing(edge_q4)
        with pytest.raises(ValueError, match="target packing is not valid"):
            connect_states(edge_q4, a, Packing(((0, 1, 2, 3), (0, 1, 2, 3))))

    def test_same(self, edge_q4):
        a = initial_packing(edge_q4)
        assert connect_states(edge_q4, a, a) == []


class TestMixing:
    @pytest.mark.parametrize("fixture", ["single_vertex_q3", "single_vertex_q2", "single_edge_q4"])
    def test_mixes_within_bound(self, fixture):
        inst = load_fixture(fixture)
        states, P = transition_matrix(inst)
        bound = math.ceil(2 * inst.n * math.log(100 * len(states)))
        curve = exact_tv_curve(inst, initial_packing(inst), bound, states=states, P=P)
        assert curve.dims == ("time",)
        assert curve.size == bound + 1
        assert curve.attrs["n_states"] == len(states)
        assert mixing_time(curve, 0.01) is not None
        assert mixing_time(curve, 0.01) <= bound
        assert np.all(np.diff(curve.values) <= 1e-12)

    def test_single_vertex_mixes_in_one_step(self, single_vertex):
        curve = exact_tv_curve(single_vertex, initial_packing(single_vertex), 3)
        np.testing.assert_allclose(curve.values, [5 / 6, 0, 0, 0], atol=1e-12)

    def test_distribution_input(self, edge_q4):
        states, P = transition_matrix(edge_q4)
        uniform = np.full(len(states), 1 / len(states))
        curve = exact_tv_curve(edge_q4, uniform, 5, states=states, P=P)
        np.testing.assert_allclose(curve.values, 0, atol=1e-12)

    def test_frozen_never_mixes(self):
        inst = load_fixture("single_edge_q2")
        curve = exact_tv_curve(inst, initial_packing(inst), 10)
        np.testing.assert_allclose(curve.values, 0.5)
        assert mixing_time(curve, 0.01) is None

    def test_errors(self, edge_q4):
        states, P = transition_matrix(edge_q4)
        with pytest.raises(ValueError, match="point mass"):
            exact_tv_curve(edge_q4, states[0], 2, P=P)
        with pytest.raises(ValueError, match="shape"):
            exact_tv_curve(edge_q4, np.ones(3) / 3, 2, states=states, P=P)

    def test_diameter_bound(self, path3_q5):
        assert diameter_bound(path3_q5) == 3 * 4 * 3

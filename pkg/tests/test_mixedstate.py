import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rand_state
from typical_worlds import linalg
from typical_worlds.errors import ConfigError, InvariantError, ZeroProbabilityError
from typical_worlds.measure import FiniteProbabilitySpace
from typical_worlds.mixedstate import (
    MixedState,
    density_of,
    empirical_density,
    independence_test,
    measurement_space,
    merge_states,
    mixed_state_from_world,
    mixture_density,
    pairwise_linear_independence,
    post_measurement_mixed,
    same_ray,
    tensor_mixed,
    validate_density,
)
from typical_worlds.quantum import basis_family
from typical_worlds.worlds import FixedStream, marginalize, relabel, sample_world, world_stream

FAIR = FiniteProbabilitySpace((0, 1), (0.5, 0.5))
PLUS = np.array([1, 1]) / np.sqrt(2)


def test_validate_density():
    validate_density(np.eye(2) / 2)
    with pytest.raises(InvariantError):
        validate_density(np.eye(2))
    with pytest.raises(InvariantError):
        validate_density(np.diag([1.5, -0.5]))
    with pytest.raises(InvariantError):
        validate_density([[0.5, 1], [0, 0.5]])


def test_density_of_fixture():
    ms = MixedState.from_pairs([(0.3, [1, 0]), (0.7, PLUS)])
    expected = np.array([[0.3 + 0.35, 0.35], [0.35, 0.35]])
    assert np.allclose(density_of(ms), expected, atol=1e-15)
    assert measurement_space(ms, basis_family(2)).probs == pytest.approx((0.65, 0.35))


def test_mixed_state_validation():
    with pytest.raises(ConfigError):
        MixedState({0: [1, 0]}, FAIR)
    with pytest.raises(InvariantError):
        MixedState({0: [1, 0], 1: [0, 1]}, FAIR, world_stream(FiniteProbabilitySpace((0, 1), (0.1, 0.9)), 0))


def test_empirical_density_converges():
    ms = MixedState({0: [1, 0], 1: PLUS}, FAIR, world_stream(FAIR, 3))
    assert linalg.trace_distance(empirical_density(ms, 100_000), density_of(ms)) < 0.01


def test_post_measurement_mixed():
    rho = np.eye(2) / 2
    out, w = post_measurement_mixed(rho, np.diag([1, 0]))
    assert w == pytest.approx(0.5)
    assert np.allclose(out, np.diag([1, 0]))
    with pytest.raises(ZeroProbabilityError):
        post_measurement_mixed(np.diag([1.0, 0.0]), np.diag([0, 1]))


def test_merge_states_phase():
    label_of, vecs = merge_states(["x", "y", "z"], {"x": [1, 0], "y": [-1j, 0], "z": [0, 2]}.__getitem__)
    assert label_of["x"] == label_of["y"] != label_of["z"]
    assert len(vecs) == 2
    assert same_ray(vecs[label_of["z"]], [0, 1])


def test_mixed_state_from_world_merges():
    P = FiniteProbabilitySpace(("u", "v", "w"), (0.2, 0.3, 0.5))
    ms = mixed_state_from_world(world_stream(P, 1), {"u": [1, 0], "v": [0, 1], "w": [1, 0]})
    assert ms.space.probs == pytest.approx((0.7, 0.3))
    assert ms.notes["members"] == {0: ("u", "w"), 1: ("v",)}
    assert ms.stream.prefix(10).symbols() == [{"u": 0, "v": 1, "w": 0}[s] for s in world_stream(P, 1).prefix(10)]


def test_independence_verdicts():
    a = sample_world(FAIR, 1, 50_000)
    b = sample_world(FAIR, 2, 50_000)
    assert independence_test([a, b], [FAIR, FAIR]).independent
    rep = independence_test([a, a], [FAIR, FAIR])
    assert rep.verdict == "dependent"
    shifted = FixedStream([0] + [1 - x for x in a.symbols()[:-1]]).prefix(50_000)
    lagged = independence_test([a, shifted], [FAIR, FAIR])
    assert lagged.verdict == "dependent" and lagged.lag1_max_abs_z > lagged.z_threshold
    small = independence_test([sample_world(FAIR, 1, 100), sample_world(FAIR, 2, 100)], [FAIR, FAIR])
    assert small.verdict == "inconclusive"


def test_independence_threshold():
    from scipy import stats

    rep = independence_test([sample_world(FAIR, 1, 20_000), sample_world(FAIR, 2, 20_000)], [FAIR, FAIR])
    assert rep.cells == 4
    assert rep.z_threshold == pytest.approx(stats.norm.isf(2 * stats.norm.sf(5) / 8))


def test_tensor_mixed_product_basis():
    m1 = MixedState({0: [1, 0], 1: PLUS}, FAIR, world_stream(FAIR, 1))
    m2 = MixedState({0: [0, 1], 1: [1, 0]}, FAIR, world_stream(FAIR, 2))
    t = tensor_mixed([m1, m2])
    assert t.notes["joint_basis"] == "product"
    assert np.allclose(density_of(t), np.kron(density_of(m1), density_of(m2)), atol=1e-12)


def test_tensor_mixed_shared_world_is_exact():
    P = FiniteProbabilitySpace(((0, 0), (1, 1)), (0.5, 0.5))
    root = world_stream(P, 4)
    m1 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, marginalize(root, 0))
    m2 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, marginalize(root, 1))
    t = tensor_mixed([m1, m2])
    assert t.notes["joint_basis"] == "shared-world"
    assert t.space.prob((0, 1)) == 0 and t.space.prob((0, 0)) == 0.5


def test_tensor_mixed_empirical_fallback():
    base = world_stream(FAIR, 7)
    lag = relabel(base, lambda x: x, FAIR)
    lag.pointwise_root = lambda: None
    m1 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, base)
    m2 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, lag)
    t = tensor_mixed([m1, m2], n=20_000)
    assert t.notes["joint_basis"] == "empirical"
    assert t.space.prob((0, 1)) == 0


def test_pairwise_linear_independence():
    assert pairwise_linear_independence([[1, 0], PLUS, [0, 1]])
    assert not pairwise_linear_independence([[1, 0], [1j, 0]])
    assert not pairwise_linear_independence([[1, 0], [0, 0]])


def test_mixture_density():
    rho = mixture_density([(0.25, np.diag([1, 0])), (0.75, np.diag([0, 1]))])
    assert np.allclose(rho, np.diag([0.25, 0.75]))
    with pytest.raises(ConfigError):
        mixture_density([(0.5, np.eye(2) / 2)])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_density_of_is_density(d, k, seed):
    rng = np.random.default_rng(seed)
    w = rng.random(k) + 0.01
    w /= w.sum()
    ms = MixedState.from_pairs([(float(p), rand_state(rng, d)) for p in w])
    rho = density_of(ms)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_trivial_fixtures():
    single = MixedState({0: [1, 0]}, FiniteProbabilitySpace((0,), (1.0,)))
    assert np.allclose(density_of(single), np.diag([1, 0]))
    assert measurement_space(np.eye(2) / 2, basis_family(2)).probs == pytest.approx((0.5, 0.5))
    assert measurement_space(np.diag([1, 0]), basis_family(2)).probs == pytest.approx((1.0, 0.0))
    out, w = post_measurement_mixed(np.eye(2) / 2, np.diag([1, 0]))
    assert np.allclose(out, np.diag([1, 0])) and w == pytest.approx(0.5)
    out, w = post_measurement_mixed(np.outer(PLUS, PLUS), np.diag([1, 0]))
    assert np.allclose(out, np.diag([1, 0])) and w == pytest.approx(0.5)
    assert np.allclose(mixture_density([(1.0, np.diag([0, 1]))]), np.diag([0, 1]))
    assert np.allclose(mixture_density([(0.5, np.diag([1, 0])), (0.5, np.diag([0, 1]))]), np.eye(2) / 2)


def test_tensor_of_fair_streams_is_maximally_mixed():
    g1 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, world_stream(FAIR, 31))
    g2 = MixedState({0: [1, 0], 1: [0, 1]}, FAIR, world_stream(FAIR, 32))
    assert np.allclose(density_of(tensor_mixed([g1, g2])), np.eye(4) / 4, atol=1e-12)
    assert tensor_mixed([g1]) is g1


def test_bb84_states_pairwise_independent():
    from typical_worlds.quantum import bb84_state

    states = [bb84_state(a, b) for a in (0, 1) for b in (0, 1)]
    assert pairwise_linear_independence(states)
    assert not pairwise_linear_independence([[1, 0], np.exp(0.7j) * np.array([1, 0])])


def test_uniqueness_proxy():
    from typical_worlds.worlds import frequency

    P = FiniteProbabilitySpace((0, 1), (0.3, 0.7))
    ms = MixedState({0: [1, 0], 1: PLUS}, P, world_stream(P, 33))
    assert frequency(ms.stream.prefix(100_000), P).within_bound
    pre = ms.stream.prefix(1_000_000)
    near = FiniteProbabilitySpace((0, 1), (0.3005, 0.6995))
    rep_a, rep_b = frequency(pre, P), frequency(pre, near)
    assert rep_a.within_bound and rep_b.within_bound
    assert abs(P.probs[0] - near.probs[0]) <= 2 * rep_a.sigma_bound
    far = FiniteProbabilitySpace((0, 1), (0.31, 0.69))
    assert not frequency(pre, far).within_bound


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**31))
def test_post_measurement_mixed_keeps_density(d, seed):
    rng = np.random.default_rng(seed)
    vs = [rand_state(rng, d) for _ in range(3)]
    rho = sum(np.outer(v, v.conj()) for v in vs) / 3
    F = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    out, w = post_measurement_mixed(rho, F)
    assert w > 0
    validate_density(out)

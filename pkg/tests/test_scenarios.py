import json
import math
from pathlib import Path

import numpy as np
import pytest

from oracles import bb84_eve_law, bb84_law
from typical_worlds import linalg
from typical_worlds.errors import CapExceededError, CompletenessError, ConfigError, DimensionError
from typical_worlds.measure import marginal_space
from typical_worlds.quantum import MeasurementFamily, PureState, basis_family, born_weight, dilate_to_unitary
from typical_worlds.scenarios import (
    CAP_ENV,
    Scenario,
    Stage,
    bb84,
    bb84_events,
    bb84_fields,
    bb84_postprocess,
    bb84_scenario,
    builtin,
    compile,
    distribution,
    load_scenario,
    mixture,
    run,
    scenario_from_json,
    sec9,
    sec10,
    sec11,
    sec12_composite,
)
from typical_worlds.worlds import WorldPrefix, world_stream

DATA = Path(__file__).parent / "data"


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_bb84_matches_case_law(p):
    space = distribution(bb84_scenario(p)).space
    law = bb84_law(p)
    assert set(space.alphabet) == set(law)
    assert max(abs(space.prob(x) - q) for x, q in law.items()) < 1e-12


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_bb84_eve_matches_case_law(p):
    space = distribution(bb84_scenario(p, eve=True)).space
    law = bb84_eve_law(p)
    assert set(space.alphabet) == set(law)
    assert max(abs(space.prob(x) - q) for x, q in law.items()) < 1e-12


def test_bb84_compile_is_complete():
    for eve in (False, True):
        assert compile(bb84_scenario(0.3, eve)).residual < 1e-12


def test_bb84_events():
    space = distribution(bb84_scenario(0.5)).space
    ev = bb84_events(space, False)
    assert space.event_prob(ev["shared"]) == pytest.approx(0.25, abs=1e-12)
    assert space.event_prob(ev["detect"]) == pytest.approx(0.0, abs=1e-12)
    assert bb84_fields(True) == ("a", "b", "e", "f", "c", "m", "d")


def test_bb84_rejects_bad_p():
    for p in (0, 1, -0.1, 2):
        with pytest.raises(ConfigError):
            bb84_scenario(p)


def test_postprocess_fixture():
    rounds = [
        (0, 0, 0, 0, 0),  # shared 0
        (1, 0, 1, 0, 0),  # sifted
        (1, 1, 1, 1, 0),  # shared 1
        (0, 1, 1, 0, 1),  # clean check
    ]
    rep = bb84_postprocess(rounds, 0.5, battery=False)
    assert (rep.shared_bits, rep.check_rounds, rep.detections, rep.sifted_out) == (2, 1, 0, 1)
    assert rep.key_bits.tolist() == [0, 1]
    assert rep.flag_round is None
    assert rep.kept_key_rate == 0.5
    flagged = bb84_postprocess(rounds + [(1, 0, 0, 0, 1), (1, 0, 0, 1, 0)], 0.5, battery=False)
    assert flagged.flag_round == 5
    assert flagged.key_bits.size == 0
    assert flagged.quarantined_bits == 3
    assert flagged.detection_rate == 0.5


def test_bb84_sampled_no_eve():
    rep = bb84(0.5, seed=1, n=100_000)
    assert rep.detections == 0 and rep.flag_round is None
    assert rep.battery is not None and rep.battery.passed
    assert abs(rep.shared_bit_rate - 0.25) < 5 * math.sqrt(0.25 * 0.75 / 1e5)


def test_bb84_sampled_eve_flags():
    rep = bb84(0.5, eve=True, seed=1, n=20_000)
    assert rep.flag_round is not None and rep.key_bits.size == 0
    assert json.loads(json.dumps(rep.to_json()))["counts"]["rounds"] == 20_000


def test_sec9():
    d = distribution(sec9())
    assert d.space.as_dict() == pytest.approx({1.0: 0.36, -1.0: 0.64})


def test_sec10_formula(rng):
    psi = np.array([0.6, 0.8])
    d = distribution(sec10(psi))
    E = {1: np.diag([1, 0]), -1: np.diag([0, 1])}
    F = {1: np.full((2, 2), 0.5), -1: np.array([[0.5, -0.5], [-0.5, 0.5]])}
    for (m, l), q in d.space.as_dict().items():
        assert q == pytest.approx(float(psi @ E[m] @ F[l] @ E[m] @ psi), abs=1e-12)


def test_sec11_formula():
    d = distribution(sec11())
    for (m, l), q in d.space.as_dict().items():
        state = [np.array([1, 0]), np.array([1, 1]) / math.sqrt(2)][m]
        w = (0.3, 0.7)[m]
        assert q == pytest.approx(w * abs(state[0 if l == 1 else 1]) ** 2, abs=1e-12)


def test_sec12_product_law():
    d = distribution(sec12_composite())
    p1 = {1.0: 0.36, -1.0: 0.64}
    p2 = {1.0: 1 / 3, -1.0: 2 / 3}
    for (a, b), q in d.space.as_dict().items():
        assert q == pytest.approx(p1[a] * p2[b], abs=1e-12)


def test_mixture_reduced_density():
    d = distribution(mixture())
    rho_b = d.reduced_density([1])
    psi_b = np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)])
    q1 = 0.36
    z = np.diag(psi_b**2)
    xp = np.array([1, 1]) / math.sqrt(2)
    xm = np.array([1, -1]) / math.sqrt(2)
    x = (xp @ psi_b) ** 2 * np.outer(xp, xp) + (xm @ psi_b) ** 2 * np.outer(xm, xm)
    assert np.abs(rho_b - (q1 * z + (1 - q1) * x)).max() < 1e-12


def test_truncated_and_symbol():
    s = sec10()
    t = s.truncated(1)
    assert distribution(t).space.alphabet == (-1, 1)
    assert marginal_space(distribution(s).space, 0).isclose(distribution(t).space)
    with pytest.raises(ConfigError):
        s.truncated(0)


def test_compile_matches_sequential(rng):
    s = sec10(np.array([0.6, 0.8j]))
    fam = compile(s)
    d = distribution(s)
    for x in d.space.alphabet:
        assert born_weight(fam, s.initial, x) == pytest.approx(d.space.prob(x), abs=1e-12)
    u = dilate_to_unitary(fam)
    assert linalg.unitarity_residual(u) < 1e-10


def test_scenario_validation():
    with pytest.raises(DimensionError):
        Scenario((2,), PureState([1, 0, 0]), (Stage.measure([0], basis_family(2)),))
    with pytest.raises(ConfigError):
        Scenario((2,), PureState([1, 0]), ())
    with pytest.raises(ConfigError):
        Scenario((2,), PureState([1, 0]), (Stage.controlled([0], 0, {0: basis_family(2)}),))
    with pytest.raises(ConfigError):
        Stage((0,), family=basis_family(2), record=False)


def test_cap(monkeypatch):
    monkeypatch.setenv(CAP_ENV, "16")
    with pytest.raises(CapExceededError):
        distribution(bb84_scenario(0.5))
    monkeypatch.setenv(CAP_ENV, "nope")
    with pytest.raises(ConfigError):
        distribution(sec9())


def test_incomplete_weights_raise():
    bad = MeasurementFamily({0: np.diag([1.0, 0.0]), 1: np.diag([0.0, 1.0])})
    s = Scenario((2,), PureState([0.6, 0.8]), (Stage.measure([0], bad),))
    object.__setattr__(bad, "operators", {0: np.diag([1.0, 0.0]), 1: np.diag([0.0, 0.5])})
    with pytest.raises(CompletenessError):
        distribution(s)


def test_builtin_lookup():
    assert builtin("bb84", p=0.2).factors == (2, 2, 2, 2, 2)
    assert builtin("bb84-eve").factors == (2,) * 6
    with pytest.raises(ConfigError):
        builtin("nope")


def test_json_scenario_matches_builtin():
    s = load_scenario(DATA / "sec10_x.json")
    assert s.repetitions == 1000 and s.seed == 5
    ref = distribution(sec10()).space
    got = distribution(s).space
    for (m, l), q in ref.as_dict().items():
        assert got.prob((0 if m == 1 else 1, l)) == pytest.approx(q, abs=1e-12)


def test_json_controlled_unitary_stage():
    obj = {
        "factors": [2, 2],
        "initial": [0.6, 0, 0.8, 0],
        "stages": [
            {"targets": [0], "family": {"basis": 2}},
            {
                "targets": [1],
                "control_stage": 0,
                "kind": "unitary",
                "branches": {"0": linalg.matrix_to_json(np.eye(2)), "1": linalg.matrix_to_json(linalg.PAULI_X)},
            },
            {"targets": [1], "family": {"basis": 2}},
        ],
    }
    d = distribution(scenario_from_json(obj))
    assert d.space.as_dict() == pytest.approx({(0, 0): 0.36, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.64})


def test_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        scenario_from_json({"factors": [2]})
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(path)
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.json")


def test_run_world_is_governed_by_distribution():
    r = run(sec9(), seed=3)
    pre = r.prefix(1000)
    assert isinstance(pre, WorldPrefix)
    assert pre.space == r.distribution.space
    assert run(sec9(), seed=3).prefix(1000) == pre


def test_factor_states_product_cut():
    d = distribution(sec12_composite())
    states = d.factor_states([1])
    for (a, b), v in states.items():
        assert linalg.trace_distance(np.outer(v, v.conj()), np.diag([1, 0] if b == 1 else [0, 1])) < 1e-12


# ------------------------------------------------------------- compile forms


def test_compile_single_stage_is_family():
    fam = compile(sec9())
    for m, op in fam.operators.items():
        assert np.allclose(op, np.diag([0, 1]) if m == -1 else np.diag([1, 0]))


def test_compile_chain_is_F_times_E():
    fam = compile(sec10())
    E = {1: np.diag([1, 0]), -1: np.diag([0, 1])}
    F = {1: np.full((2, 2), 0.5), -1: np.array([[0.5, -0.5], [-0.5, 0.5]])}
    for (m, l), op in fam.operators.items():
        assert np.allclose(op, F[l] @ E[m], atol=1e-12)


def test_compile_parallel_is_tensor():
    fam = compile(sec12_composite())
    E = {1: np.diag([1, 0]), -1: np.diag([0, 1])}
    for (m1, m2), op in fam.operators.items():
        assert np.allclose(op, np.kron(E[m1], E[m2]), atol=1e-12)


@pytest.mark.parametrize("name", ["sec9", "sec10", "sec11", "sec12-composite", "mixture", "bb84", "bb84-eve"])
def test_builtin_oracle_equivalence(name):
    from typical_worlds.worlds import cellwise_within

    s = builtin(name)
    assert compile(s).residual < 1e-9
    r = run(s, seed=101)
    assert cellwise_within(r.prefix(100_000), r.distribution.space)


def test_degenerate_outcome_gives_constant_world():
    r = run(sec9(psi=(1.0, 0.0)), seed=0)
    assert set(r.prefix(1000).symbols()) == {1}


def test_no_eve_worlds_share_bits_exactly():
    for seed in range(3):
        rep = bb84(0.3, seed=seed, n=50_000)
        assert rep.flag_round is None and rep.detections == 0
        assert abs(rep.kept_key_rate - 0.35) <= 5 * math.sqrt(0.35 * 0.65 / 50_000)


def test_eve_flag_records_detection_round():
    flagged = 0
    for seed in range(40):
        rep = bb84(0.5, eve=True, seed=seed, n=1000)
        if rep.flag_round is not None:
            flagged += 1
            head = world_stream(rep.exact_space, seed).prefix(rep.flag_round)
            pre = bb84_postprocess(head, 0.5, eve=True, battery=False)
            assert pre.detections == 1
    # each of ~250 check rounds detects with probability 1/4
    assert flagged == 40


def test_all_sifted_world_keeps_nothing():
    rounds = [(a, 0, 1, a, d) for a in (0, 1) for d in (0, 1)] * 10
    rep = bb84_postprocess(rounds, 0.5, battery=False)
    assert rep.sifted_out == 40 and rep.key_bits.size == 0 and rep.check_rounds == 0

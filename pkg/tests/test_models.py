# tests/test_models.py

import pytest

from ramdp.models import (
    Direction,
    Mdp,
    ModelError,
    Policy,
    Semantics,
    SpecKind,
    Specification,
    UncertainMdp,
    check_same_support,
    induce_markov_chain,
    initial_prior_umdp,
    point_umdp,
    validate_mdp,
    validate_policy,
    validate_umdp,
)


def _two_state(probs, enabled=((0,), (0,))):
    transitions = {(0, 0): tuple(zip((0, 1), probs))}
    if enabled[1]:
        transitions[(1, 0)] = ((1, 1.0),)
    return Mdp(
        n_states=2,
        initial_state=0,
        actions=("a",),
        enabled=enabled,
        transitions=transitions,
        state_labels=("s0", "s1"),
    )


def _umdp(intervals):
    return UncertainMdp(
        n_states=2,
        initial_state=0,
        actions=("a",),
        enabled=((0,), (0,)),
        interval_transitions={(0, 0): intervals, (1, 0): ((1, 1.0, 1.0),)},
        state_labels=("s0", "s1"),
    )


def test_validate_mdp_accepts_uniform_two_state_model():
    assert validate_mdp(_two_state((0.5, 0.5))).ok


def test_validate_mdp_reports_sum_violation_with_pair():
    report = validate_mdp(_two_state((0.6, 0.5)))
    assert not report.ok
    assert any("sum 1.1" in v and "(s0,a)" in v for v in report.violations)


def test_validate_mdp_reports_state_without_actions():
    mdp = _two_state((0.5, 0.5), enabled=((0,), ()))
    report = validate_mdp(mdp)
    assert "no enabled action at s1" in report.violations


def test_validate_mdp_rejects_zero_probability_successor():
    report = validate_mdp(_two_state((1.0, 0.0)))
    assert any("zero-probability successor" in v for v in report.violations)


def test_raise_if_invalid_raises_model_error():
    with pytest.raises(ModelError, match="sum 1.1"):
        validate_mdp(_two_state((0.6, 0.5))).raise_if_invalid()


def test_validate_umdp_accepts_consistent_intervals():
    assert validate_umdp(_umdp(((0, 0.2, 0.4), (1, 0.6, 0.8)))).ok


def test_validate_umdp_reports_lower_sum_above_one():
    report = validate_umdp(_umdp(((0, 0.6, 0.7), (1, 0.5, 0.6))))
    assert any("lower sum 1.1 > 1" in v and "(s0,a)" in v for v in report.violations)


def test_validate_umdp_reports_zero_lower_bound():
    report = validate_umdp(_umdp(((0, 0.0, 0.5), (1, 0.5, 1.0))))
    assert any("zero lower bound" in v for v in report.violations)


def test_validate_umdp_reports_upper_sum_below_one():
    report = validate_umdp(_umdp(((0, 0.1, 0.3), (1, 0.1, 0.3))))
    assert any("upper sum" in v for v in report.violations)


def test_successors_are_stored_in_index_order():
    mdp = Mdp(
        n_states=2,
        initial_state=0,
        actions=("a",),
        enabled=((0,), (0,)),
        transitions={(0, 0): ((1, 0.3), (0, 0.7)), (1, 0): ((1, 1.0),)},
    )
    assert mdp.transitions[(0, 0)] == ((0, 0.7), (1, 0.3))


def test_prior_of_example_uses_epsilon_and_point_intervals(example):
    mdp, _ = example
    prior, strengths = initial_prior_umdp(mdp)
    assert prior.interval_transitions[(0, 0)] == ((1, 1e-4, 1 - 1e-4), (2, 1e-4, 1 - 1e-4))
    for state in (1, 2, 3):
        assert prior.interval_transitions[(state, 2)] == ((state, 1.0, 1.0),)
    assert strengths == {
        (0, 0, 1): (5, 10), (0, 0, 2): (5, 10), (0, 1, 2): (5, 10), (0, 1, 3): (5, 10),
    }
    assert validate_umdp(prior).ok


def test_prior_reads_only_the_support(example):
    mdp, _ = example
    shifted = Mdp(
        n_states=mdp.n_states,
        initial_state=mdp.initial_state,
        actions=mdp.actions,
        enabled=mdp.enabled,
        transitions={**mdp.transitions, (0, 0): ((1, 0.2), (2, 0.8))},
        state_labels=mdp.state_labels,
    )
    assert initial_prior_umdp(mdp) == initial_prior_umdp(shifted)


def test_prior_of_deterministic_model_is_all_point():
    deterministic = Mdp(
        n_states=2, initial_state=0, actions=("a",), enabled=((0,), (0,)),
        transitions={(0, 0): ((1, 1.0),), (1, 0): ((1, 1.0),)},
    )
    prior, strengths = initial_prior_umdp(deterministic)
    assert strengths == {}
    assert all(len(entries) == 1 for entries in prior.interval_transitions.values())


@pytest.mark.parametrize("epsilon", [0.0, 0.5, 0.7])
def test_prior_rejects_epsilon_outside_open_half_interval(example, epsilon):
    with pytest.raises(ModelError):
        initial_prior_umdp(example[0], epsilon=epsilon)


def test_prior_rejects_unordered_strength(example):
    with pytest.raises(ModelError):
        initial_prior_umdp(example[0], strength=(10, 5))


def test_induce_deterministic_policy(example):
    mdp, _ = example
    chain = induce_markov_chain(mdp, Policy.deterministic({0: 0, 1: 2, 2: 2, 3: 2}))
    assert dict(chain.transitions[(0, 0)]) == {1: 0.7, 2: 0.3}
    assert chain.is_markov_chain()


def test_induce_uniform_policy_mixes_actions(example):
    mdp, _ = example
    policy = Policy.randomized({0: {0: 0.5, 1: 0.5}, 1: {2: 1.0}, 2: {2: 1.0}, 3: {2: 1.0}})
    successors = dict(induce_markov_chain(mdp, policy).transitions[(0, 0)])
    assert successors[1] == pytest.approx(0.35)
    assert successors[2] == pytest.approx(0.2)
    assert successors[3] == pytest.approx(0.45)
    assert sum(successors.values()) == pytest.approx(1.0)


def test_induce_on_single_action_model_keeps_transitions():
    mdp = _two_state((0.5, 0.5))
    chain = induce_markov_chain(mdp, Policy.deterministic({0: 0, 1: 0}))
    assert chain.transitions == mdp.transitions


def test_induce_rejects_disabled_action(example):
    mdp, _ = example
    with pytest.raises(ModelError):
        induce_markov_chain(mdp, Policy.deterministic({0: 2, 1: 2, 2: 2, 3: 2}))


def test_validate_policy_flags_missing_state(example):
    report = validate_policy(example[0], Policy.deterministic({0: 0}))
    assert not report.ok


def test_point_umdp_has_degenerate_intervals(example):
    lifted = point_umdp(example[0])
    assert lifted.interval_transitions[(0, 0)] == ((1, 0.7, 0.7), (2, 0.3, 0.3))
    check_same_support(example[0], lifted)


def test_check_same_support_detects_mismatch(example):
    mdp, _ = example
    other = Mdp(
        n_states=mdp.n_states,
        initial_state=0,
        actions=mdp.actions,
        enabled=mdp.enabled,
        transitions={**mdp.transitions, (0, 0): ((1, 0.7), (3, 0.3))},
    )
    with pytest.raises(ModelError, match="support mismatch"):
        check_same_support(mdp, other)


def test_specification_rejects_empty_and_overlapping_sets():
    with pytest.raises(ModelError):
        Specification(SpecKind.REACH, set())
    with pytest.raises(ModelError):
        Specification(SpecKind.REACH_AVOID, {1}, avoid_states={1})
    with pytest.raises(ModelError):
        Specification(SpecKind.REACH, {1}, avoid_states={2})


def test_specification_describe_and_nature_direction():
    spec = Specification(SpecKind.REACH_AVOID, {1}, avoid_states={2}, target_name="goal", avoid_name="trap")
    assert spec.describe() == "P_Max(!trap U goal)"
    pessimistic = spec.with_semantics(Semantics.PESSIMISTIC)
    assert pessimistic.describe() == "P_MaxMin(!trap U goal)"
    assert pessimistic.nature_minimizes()
    optimistic = Specification(SpecKind.EXPECTED_REWARD, {1}, direction=Direction.MIN,
                               semantics=Semantics.OPTIMISTIC)
    assert optimistic.describe() == "R_MinMin(F target)"
    assert optimistic.nature_minimizes()

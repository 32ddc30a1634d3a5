# tests/test_learners.py

import math

import numpy as np
import pytest

from ramdp.learners import (
    CountTable,
    LearnerConfig,
    LearnerMethod,
    LuiTransitionState,
    cap_strength,
    current_model,
    initial_learner_state,
    learner_step,
    lui_update,
    map_point_estimate,
    pac_delta,
    pac_error_budget,
    pac_intervals,
    ucrl2_intervals,
    ucrl2_radius,
)
from ramdp.models import Mdp, ModelError, UncertainMdp, validate_mdp, validate_umdp

TOL = 1e-9


def _priors(bounds, strength):
    return [LuiTransitionState(lo, hi, *strength) for lo, hi in bounds]


def _counts(entries):
    table = CountTable()
    for (state, action, successor), times in entries.items():
        table.add(state, action, successor, times)
    return table


def test_lui_agreement_on_both_bounds():
    posteriors = lui_update(_priors([(0.1, 0.9), (0.1, 0.9)], (5, 10)), 10, [7, 3])
    assert [p.lower for p in posteriors] == pytest.approx([0.4, 0.2])
    assert [p.upper for p in posteriors] == pytest.approx([0.8, 0.6])
    assert all((p.n_lo, p.n_hi) == (15, 20) for p in posteriors)


def test_lui_conflict_on_both_bounds():
    posteriors = lui_update(_priors([(0.2, 0.4), (0.6, 0.8)], (5, 10)), 10, [5, 5])
    assert posteriors[0].lower == pytest.approx(0.4)
    assert posteriors[0].upper == pytest.approx(7 / 15)
    assert posteriors[1].lower == pytest.approx(8 / 15)
    assert posteriors[1].upper == pytest.approx(0.6)
    assert sum(p.lower for p in posteriors) <= 1 + TOL <= sum(p.upper for p in posteriors) + 2 * TOL


def test_lui_point_prior_moves_toward_the_data():
    posteriors = lui_update(_priors([(0.5, 0.5), (0.5, 0.5)], (5, 5)), 5, [3, 2])
    assert (posteriors[0].lower, posteriors[0].upper) == pytest.approx((0.55, 0.55))
    assert (posteriors[1].lower, posteriors[1].upper) == pytest.approx((0.45, 0.45))


def test_lui_rejects_inconsistent_counts():
    priors = _priors([(0.1, 0.9), (0.1, 0.9)], (5, 10))
    with pytest.raises(ModelError):
        lui_update(priors, 0, [0, 0])
    with pytest.raises(ModelError):
        lui_update(priors, 10, [7, 2])
    with pytest.raises(ModelError):
        lui_update(priors, 10, [10])


def _random_case(rng):
    m = int(rng.integers(2, 6))
    p = (rng.dirichlet(np.ones(m)) + 0.01) / (1 + 0.01 * m)
    lows = np.maximum(1e-4, p * rng.uniform(0, 1, m))
    highs = np.minimum(1.0, p + (1 - p) * rng.uniform(0, 1, m))
    n_lo = int(rng.integers(1, 30))
    n_hi = n_lo + int(rng.integers(0, 30))
    n_samples = int(rng.integers(1, 60))
    # data from a distribution unrelated to the prior, so conflicts are common
    counts = rng.multinomial(n_samples, rng.dirichlet(np.ones(m))).tolist()
    priors = [LuiTransitionState(float(lo), float(hi), n_lo, n_hi) for lo, hi in zip(lows, highs)]
    return priors, n_samples, counts


def test_lui_closure_over_random_cases():
    rng = np.random.default_rng(2024)
    agreements = 0
    for _ in range(100_000):
        priors, n_samples, counts = _random_case(rng)
        posteriors = lui_update(priors, n_samples, counts)
        for post in posteriors:
            assert 0.0 < post.lower <= post.upper <= 1.0 + TOL

        frequencies = [k / n_samples for k in counts]
        lower_sum = math.fsum(p.lower for p in priors)
        upper_sum = math.fsum(p.upper for p in priors)
        new_lower = math.fsum(p.lower for p in posteriors)
        new_upper = math.fsum(p.upper for p in posteriors)
        assert new_lower <= 1.0 + TOL
        assert new_upper >= 1.0 - TOL

        lower_ok = all(f >= p.lower for f, p in zip(frequencies, priors))
        upper_ok = all(f <= p.upper for f, p in zip(frequencies, priors))
        if lower_ok and upper_ok:
            agreements += 1
            assert lower_sum - TOL <= new_lower
            assert new_upper <= upper_sum + TOL

        upper_conflicts = [f > p.upper for f, p in zip(frequencies, priors)]
        assert sum(upper_conflicts) < len(priors)
        for f, p, conflict in zip(frequencies, priors, upper_conflicts):
            if conflict:
                assert f >= p.lower
            if f < p.lower:
                assert f <= p.upper
    assert agreements > 0


def test_repeated_updates_keep_a_valid_interval_set():
    rng = np.random.default_rng(5)
    truth = np.array([0.2, 0.5, 0.3])
    priors = _priors([(1e-4, 1 - 1e-4)] * 3, (5, 10))
    for _ in range(30):
        n_samples = int(rng.integers(1, 200))
        counts = rng.multinomial(n_samples, truth).tolist()
        priors = lui_update(priors, n_samples, counts, strength_cap=(50, 100))
        assert math.fsum(p.lower for p in priors) <= 1 + TOL
        assert math.fsum(p.upper for p in priors) >= 1 - TOL
        assert all(0 < p.lower <= p.upper <= 1 + TOL for p in priors)
        assert all(p.n_lo <= 50 and p.n_hi <= 100 for p in priors)


def test_lui_intervals_concentrate_on_the_true_probability():
    rng = np.random.default_rng(99)
    truth = np.array([0.3, 0.7])
    successes = 0
    for _ in range(100):
        priors = _priors([(1e-4, 1 - 1e-4)] * 2, (5, 10))
        for _ in range(20):
            counts = rng.multinomial(1000, truth).tolist()
            priors = lui_update(priors, 1000, counts)
        first = priors[0]
        if first.upper - first.lower < 0.02 and abs((first.lower + first.upper) / 2 - truth[0]) < 0.01:
            successes += 1
    assert successes >= 95


@pytest.mark.parametrize("strength, cap, n_samples, expected", [
    ((5, 10), (50, 100), 10, (15, 20)),
    ((45, 95), (50, 100), 10, (50, 100)),
    ((50, 100), (50, 100), 1000, (50, 100)),
    ((5, 10), None, 10, (15, 20)),
])
def test_cap_strength(strength, cap, n_samples, expected):
    assert cap_strength(strength, cap, n_samples) == expected


@pytest.mark.parametrize("alphas, counts, expected", [
    ((10, 10), (0, 0), (0.5, 0.5)),
    ((10, 10), (7, 3), (16 / 28, 12 / 28)),
    ((1, 1), (8, 2), (0.8, 0.2)),
])
def test_map_point_estimate(alphas, counts, expected):
    estimate = map_point_estimate(alphas, counts)
    assert estimate == pytest.approx(expected)
    assert sum(estimate) == pytest.approx(1.0)


def test_map_point_estimate_of_flat_prior_without_data_is_undefined():
    assert map_point_estimate((1, 1), (0, 0)) is None


def test_pac_error_budget(example):
    mdp, _ = example
    assert pac_error_budget(mdp, 0.01) == pytest.approx(2.5e-3)


def test_pac_error_budget_of_deterministic_model_falls_back_to_gamma():
    mdp = Mdp(
        n_states=1, initial_state=0, actions=("stay",), enabled=((0,),), transitions={(0, 0): ((0, 1.0),)},
    )
    assert pac_error_budget(mdp, 0.01) == 0.01


def test_pac_delta_and_intervals():
    assert pac_delta(100, 0.01) == pytest.approx(math.sqrt(math.log(200) / 200))
    assert pac_delta(100, 0.01) == pytest.approx(0.16276, abs=1e-5)
    assert pac_delta(400, 0.01) / pac_delta(100, 0.01) == pytest.approx(0.5)
    (lo1, hi1), (lo2, hi2) = pac_intervals([0.01, 0.99], 100, 0.01, 1e-4)
    assert lo1 == 1e-4
    assert hi1 == pytest.approx(0.01 + 0.16276, abs=1e-5)
    assert lo2 == pytest.approx(0.99 - 0.16276, abs=1e-5)
    assert hi2 == 1.0


def test_ucrl2_radius_is_vacuous_early_and_shrinks_later():
    assert ucrl2_radius(4, 2, 10_000, 10, 0.01) > 1
    assert ucrl2_intervals([0.3, 0.7], 4, 2, 10_000, 10, 0.01, 1e-4) == [(1e-4, 1.0), (1e-4, 1.0)]
    assert ucrl2_radius(4, 2, 10_000, 10**9, 0.01) < 1e-3
    assert ucrl2_radius(4, 2, 10_000, 10, 0.005) > ucrl2_radius(4, 2, 10_000, 10, 0.01)


@pytest.mark.parametrize("kwargs", [
    {"epsilon": 0.5},
    {"prior_strength": (10, 5)},
    {"strength_cap": (3, 100)},
    {"gamma": 1.0},
    {"map_prior_alpha": 0.5},
    {"dirichlet_cap": 15.0},
])
def test_learner_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        LearnerConfig(LearnerMethod.LUI, **kwargs)


def test_learner_config_label_defaults_to_method():
    assert LearnerConfig("PAC").label == "PAC"
    assert LearnerConfig("LUI", label="LUI-weak").label == "LUI-weak"


def test_count_table_merge_and_consistency():
    first = _counts({(0, 0, 1): 3, (0, 0, 2): 1})
    second = _counts({(0, 0, 1): 2, (0, 1, 3): 4})
    merged = first.merged(second)
    assert merged.pair(0, 0) == 6
    assert merged.transition(0, 0, 1) == 5
    assert merged.pairs() == [(0, 0), (0, 1)]
    assert merged.total() == 10
    assert merged.is_consistent()
    assert first.pair(0, 0) == 4


def test_lui_step_updates_only_visited_pairs(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.LUI)
    state = initial_learner_state(config, mdp)
    new_state, model = learner_step(config, state, _counts({(0, 0, 1): 7, (0, 0, 2): 3}))

    assert isinstance(model, UncertainMdp)
    lower, upper = model.interval(0, 0, 1)
    assert lower == pytest.approx((10 * 1e-4 + 7) / 20)
    assert upper == pytest.approx((10 * (1 - 1e-4) + 7) / 20)
    assert new_state.lui[(0, 1)] == state.lui[(0, 1)]
    assert model.interval_transitions[(0, 1)] == state.graph.interval_transitions[(0, 1)]
    assert model.interval_transitions[(1, 2)] == ((1, 1.0, 1.0),)
    assert new_state.counts.pair(0, 0) == 10
    assert validate_umdp(model).ok


def test_map_starts_uniform_and_follows_the_mode(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.MAP)
    state = initial_learner_state(config, mdp)
    prior_model = current_model(config, state)
    assert isinstance(prior_model, Mdp)
    assert dict(prior_model.transitions[(0, 0)]) == pytest.approx({1: 0.5, 2: 0.5})

    _, model = learner_step(config, state, _counts({(0, 0, 1): 7, (0, 0, 2): 3}))
    assert dict(model.transitions[(0, 0)]) == pytest.approx({1: 16 / 28, 2: 12 / 28})
    assert model.transitions[(2, 2)] == ((2, 1.0),)


def test_map_with_flat_prior_keeps_unseen_successors(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.MAP, map_prior_alpha=1.0)
    state = initial_learner_state(config, mdp)
    assert dict(current_model(config, state).transitions[(0, 0)]) == pytest.approx({1: 0.5, 2: 0.5})

    _, model = learner_step(config, state, _counts({(0, 0, 1): 5}))
    successors = dict(model.transitions[(0, 0)])
    assert successors[2] == pytest.approx(1e-4 / 1.0001)
    assert successors[1] == pytest.approx(1 / 1.0001)
    assert validate_mdp(model).ok


def test_pac_step_centres_on_the_mode(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.PAC)
    state = initial_learner_state(config, mdp)
    assert state.gamma_p == pytest.approx(2.5e-3)

    _, model = learner_step(config, state, _counts({(0, 0, 1): 70, (0, 0, 2): 30}))
    delta = math.sqrt(math.log(2 / 2.5e-3) / 200)
    lower, upper = model.interval(0, 0, 1)
    assert lower == pytest.approx(79 / 118 - delta)
    assert upper == pytest.approx(79 / 118 + delta)
    # unvisited pairs keep the prior
    assert model.interval_transitions[(0, 1)] == state.graph.interval_transitions[(0, 1)]
    assert validate_umdp(model).ok


def test_ucrl2_step_uses_total_steps(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.UCRL2)
    state = initial_learner_state(config, mdp)
    counts = _counts({(0, 0, 1): 7000, (0, 0, 2): 3000})
    _, model = learner_step(config, state, counts, t_k=10_000)
    radius = ucrl2_radius(4, 2, 10_000, 10_000, 0.01)
    lower, upper = model.interval(0, 0, 1)
    assert lower == pytest.approx(7009 / 10018 - radius)
    assert upper == pytest.approx(7009 / 10018 + radius)


def test_dirichlet_cap_keeps_the_mode(example):
    mdp, _ = example
    config = LearnerConfig(LearnerMethod.MAP, dirichlet_cap=40.0)
    state = initial_learner_state(config, mdp)
    new_state, model = learner_step(config, state, _counts({(0, 0, 1): 70, (0, 0, 2): 30}))
    alphas = new_state.dirichlet.alphas[(0, 0)]
    assert sum(alphas) == pytest.approx(40.0)
    assert dict(model.transitions[(0, 0)])[1] == pytest.approx(79 / 118)

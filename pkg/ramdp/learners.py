# ramdp/learners.py

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .models import Mdp, ModelError, UncertainMdp, initial_prior_umdp

logger = logging.getLogger('Ramdp')

DEFAULT_EPSILON = 1e-4
DEFAULT_PRIOR_STRENGTH = (5, 10)
DEFAULT_MAP_PRIOR_ALPHA = 10.0
DEFAULT_GAMMA = 0.01


class LearnerMethod(Enum):
    LUI = "LUI"
    PAC = "PAC"
    MAP = "MAP"
    UCRL2 = "UCRL2"


@dataclass(frozen=True)
class LearnerConfig:
    method: LearnerMethod
    epsilon: float = DEFAULT_EPSILON
    prior_strength: tuple = DEFAULT_PRIOR_STRENGTH
    strength_cap: tuple = None
    map_prior_alpha: float = DEFAULT_MAP_PRIOR_ALPHA
    gamma: float = DEFAULT_GAMMA
    dirichlet_cap: float = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "method", LearnerMethod(self.method))
        object.__setattr__(self, "prior_strength", tuple(int(n) for n in self.prior_strength))
        if self.strength_cap is not None:
            object.__setattr__(self, "strength_cap", tuple(int(n) for n in self.strength_cap))
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        n_lo, n_hi = self.prior_strength
        if not 1 <= n_lo <= n_hi:
            raise ValueError(f"prior_strength must satisfy 1 <= n_lo <= n_hi, got {self.prior_strength}")
        if self.strength_cap is not None:
            cap_lo, cap_hi = self.strength_cap
            if not (n_lo <= cap_lo <= cap_hi and n_hi <= cap_hi):
                raise ValueError(
                    f"strength_cap {self.strength_cap} must be ordered and not below prior_strength"
                )
        if self.map_prior_alpha < 1.0:
            raise ValueError(f"map_prior_alpha must be >= 1, got {self.map_prior_alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.dirichlet_cap is not None and self.dirichlet_cap < 2 * self.map_prior_alpha:
            raise ValueError(
                f"dirichlet_cap must be at least twice map_prior_alpha, got {self.dirichlet_cap}"
            )
        if not self.label:
            object.__setattr__(self, "label", self.method.value)


@dataclass(frozen=True)
class LuiTransitionState:
    lower: float
    upper: float
    n_lo: int
    n_hi: int


@dataclass
class CountTable:
    """Visit counts of (state, action) pairs and of their transitions."""

    pair_counts: dict = field(default_factory=dict)
    transition_counts: dict = field(default_factory=dict)

    def add(self, state, action, successor, times=1):
        self.pair_counts[(state, action)] = self.pair_counts.get((state, action), 0) + times
        key = (state, action, successor)
        self.transition_counts[key] = self.transition_counts.get(key, 0) + times

    def pair(self, state, action):
        return self.pair_counts.get((state, action), 0)

    def transition(self, state, action, successor):
        return self.transition_counts.get((state, action, successor), 0)

    def successor_counts(self, state, action, successors):
        return [self.transition(state, action, t) for t in successors]

    def pairs(self):
        return sorted(key for key, count in self.pair_counts.items() if count > 0)

    def total(self):
        return sum(self.pair_counts.values())

    def copy(self):
        return CountTable(dict(self.pair_counts), dict(self.transition_counts))

    def merged(self, other):
        result = self.copy()
        for key, count in other.pair_counts.items():
            result.pair_counts[key] = result.pair_counts.get(key, 0) + count
        for key, count in other.transition_counts.items():
            result.transition_counts[key] = result.transition_counts.get(key, 0) + count
        return result

    def is_consistent(self):
        sums = {}
        for (state, action, _), count in self.transition_counts.items():
            sums[(state, action)] = sums.get((state, action), 0) + count
        nonzero = {key: count for key, count in self.pair_counts.items() if count}
        return sums == nonzero


@dataclass(frozen=True)
class DirichletState:
    alphas: dict


@dataclass(frozen=True)
class LearnerState:
    graph: UncertainMdp
    lui: dict
    dirichlet: DirichletState
    counts: CountTable
    gamma_p: float = None


def lui_update(priors, n_samples, successor_counts, strength_cap=None):
    """Bayesian update of one (state, action) pair's intervals from a batch of samples.

    All lower bounds use the optimistic strength n_hi when every observed
    frequency is at or above its lower bound, otherwise the pessimistic n_lo;
    the upper bounds follow the same rule against their upper bounds.
    """
    if n_samples < 1:
        raise ModelError(f"lui_update needs at least one sample, got {n_samples}")
    if len(successor_counts) != len(priors):
        raise ModelError("lui_update got counts for a different number of successors")
    if any(k < 0 for k in successor_counts) or sum(successor_counts) != n_samples:
        raise ModelError(f"Successor counts {successor_counts} do not add up to {n_samples}")

    frequencies = [k / n_samples for k in successor_counts]
    lower_agrees = all(f >= prior.lower for f, prior in zip(frequencies, priors))
    upper_agrees = all(f <= prior.upper for f, prior in zip(frequencies, priors))

    posteriors = []
    for prior, k in zip(priors, successor_counts):
        lower_strength = prior.n_hi if lower_agrees else prior.n_lo
        upper_strength = prior.n_hi if upper_agrees else prior.n_lo
        lower = (lower_strength * prior.lower + k) / (lower_strength + n_samples)
        upper = (upper_strength * prior.upper + k) / (upper_strength + n_samples)
        n_lo, n_hi = cap_strength((prior.n_lo, prior.n_hi), strength_cap, n_samples)
        # guards rounding when both bounds are mathematically equal
        posteriors.append(LuiTransitionState(lower, max(upper, lower), n_lo, n_hi))
    return posteriors


def cap_strength(strength, cap, n_samples):
    n_lo, n_hi = strength
    if cap is None:
        return n_lo + n_samples, n_hi + n_samples
    return min(n_lo + n_samples, cap[0]), min(n_hi + n_samples, cap[1])


def map_point_estimate(alphas, counts):
    """Mode of the Dirichlet posterior, or None when every posterior alpha is 1."""
    posterior = [alpha + k for alpha, k in zip(alphas, counts)]
    denominator = sum(posterior) - len(posterior)
    if denominator <= 0:
        return None
    return [(alpha - 1.0) / denominator for alpha in posterior]


def _dirichlet_mode(alphas):
    estimate = map_point_estimate(alphas, [0] * len(alphas))
    if estimate is None:
        return [1.0 / len(alphas)] * len(alphas)
    return estimate


def _floored_mode(alphas, epsilon):
    """Dirichlet mode with no entry below epsilon, so every known successor keeps some mass."""
    mode = _dirichlet_mode(alphas)
    if min(mode) >= epsilon:
        return mode
    floored = [max(p, epsilon) for p in mode]
    total = math.fsum(floored)
    return [p / total for p in floored]


def _cap_alphas(alphas, cap):
    """Shrink the posterior mass to cap while keeping the mode."""
    total = sum(alphas)
    if cap is None or total <= cap:
        return tuple(alphas)
    m = len(alphas)
    scale = (cap - m) / (total - m)
    return tuple(1.0 + (alpha - 1.0) * scale for alpha in alphas)


def pac_error_budget(graph, gamma):
    """Split the global error rate gamma evenly over all stochastic transitions."""
    if not 0.0 < gamma < 1.0:
        raise ModelError(f"gamma must lie in (0, 1), got {gamma}")
    stochastic = sum(
        len(graph.support(state, action))
        for state, action in graph.pairs()
        if len(graph.support(state, action)) > 1
    )
    if stochastic == 0:
        logger.warning("⚠️ Model has no stochastic transitions, PAC budget falls back to gamma")
        return gamma
    return gamma / stochastic


def pac_delta(n_samples, gamma_p):
    return math.sqrt(math.log(2.0 / gamma_p) / (2.0 * n_samples))


def _clipped_intervals(estimates, radius, epsilon):
    intervals = []
    for estimate in estimates:
        lower = max(epsilon, estimate - radius)
        upper = min(estimate + radius, 1.0)
        intervals.append((lower, max(upper, lower)))
    return intervals


def pac_intervals(estimates, n_samples, gamma_p, epsilon):
    """Hoeffding intervals around point estimates, clipped to [epsilon, 1]."""
    if n_samples < 1:
        raise ModelError("PAC intervals need at least one sample")
    return _clipped_intervals(estimates, pac_delta(n_samples, gamma_p), epsilon)


def ucrl2_radius(n_states, n_actions, t_k, n_samples, gamma):
    return math.sqrt(
        14.0 * n_states * math.log(2.0 * n_actions * max(1, t_k) / gamma) / max(1, n_samples)
    )


def ucrl2_intervals(estimates, n_states, n_actions, t_k, n_samples, gamma, epsilon):
    radius = ucrl2_radius(n_states, n_actions, t_k, n_samples, gamma)
    return _clipped_intervals(estimates, radius, epsilon)


def initial_learner_state(config, graph_source):
    """Prior state of a learner; only the support of graph_source is read."""
    prior, strengths = initial_prior_umdp(graph_source, config.epsilon, config.prior_strength)
    lui = {}
    alphas = {}
    for (state, action), entries in prior.interval_transitions.items():
        if len(entries) == 1:
            continue
        if config.method == LearnerMethod.LUI:
            lui[(state, action)] = tuple(
                LuiTransitionState(lower, upper, *strengths[(state, action, t)])
                for t, lower, upper in entries
            )
        else:
            alphas[(state, action)] = tuple(float(config.map_prior_alpha) for _ in entries)

    gamma_p = pac_error_budget(prior, config.gamma) if config.method == LearnerMethod.PAC else None
    logger.debug(f"Initialized {config.label} learner over {prior.n_states} states")
    return LearnerState(
        graph=prior,
        lui=lui,
        dirichlet=DirichletState(alphas),
        counts=CountTable(),
        gamma_p=gamma_p,
    )


def learner_step(config, state, iteration_counts, t_k=1):
    """Fold one iteration's counts into the learner and return (state, current model).

    LUI updates each visited pair once with the whole batch. The Dirichlet based
    learners add the batch to their posterior parameters.
    """
    counts = state.counts.merged(iteration_counts)
    graph = state.graph

    if config.method == LearnerMethod.LUI:
        lui = dict(state.lui)
        for key in iteration_counts.pairs():
            if key not in lui:
                continue
            n_samples = iteration_counts.pair(*key)
            ks = iteration_counts.successor_counts(*key, graph.support(*key))
            lui[key] = tuple(lui_update(lui[key], n_samples, ks, config.strength_cap))
        new_state = replace(state, lui=lui, counts=counts)
    else:
        alphas = dict(state.dirichlet.alphas)
        for key in iteration_counts.pairs():
            if key not in alphas:
                continue
            ks = iteration_counts.successor_counts(*key, graph.support(*key))
            updated = [alpha + k for alpha, k in zip(alphas[key], ks)]
            alphas[key] = _cap_alphas(updated, config.dirichlet_cap)
        new_state = replace(state, dirichlet=DirichletState(alphas), counts=counts)

    return new_state, current_model(config, new_state, t_k)


def _max_enabled_actions(graph):
    return max(len(actions) for actions in graph.enabled)


def current_model(config, state, t_k=1):
    """The model a learner currently believes: a uMDP, or a point Mdp for MAP."""
    graph = state.graph

    if config.method == LearnerMethod.LUI:
        intervals = dict(graph.interval_transitions)
        for (s, a), posteriors in state.lui.items():
            intervals[(s, a)] = tuple(
                (t, post.lower, post.upper) for t, post in zip(graph.support(s, a), posteriors)
            )
        return replace(graph, interval_transitions=intervals)

    if config.method == LearnerMethod.MAP:
        transitions = {
            key: tuple((t, 1.0) for t, _, _ in entries) for key, entries in graph.edges.items()
        }
        for key, alphas in state.dirichlet.alphas.items():
            transitions[key] = tuple(zip(graph.support(*key), _floored_mode(alphas, config.epsilon)))
        return Mdp(
            n_states=graph.n_states,
            initial_state=graph.initial_state,
            actions=graph.actions,
            enabled=graph.enabled,
            transitions=transitions,
            rewards=dict(graph.rewards),
            state_labels=graph.state_labels,
        )

    intervals = dict(graph.interval_transitions)
    n_actions = _max_enabled_actions(graph)
    for key, alphas in state.dirichlet.alphas.items():
        n_samples = state.counts.pair(*key)
        if n_samples == 0:
            continue
        estimates = _dirichlet_mode(alphas)
        if config.method == LearnerMethod.PAC:
            bounds = pac_intervals(estimates, n_samples, state.gamma_p, config.epsilon)
        else:
            bounds = ucrl2_intervals(
                estimates, graph.n_states, n_actions, t_k, n_samples, config.gamma, config.epsilon
            )
        intervals[key] = tuple((t, lo, hi) for t, (lo, hi) in zip(graph.support(*key), bounds))
    return replace(graph, interval_transitions=intervals)

# ramdp/models.py

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

logger = logging.getLogger('Ramdp')

PROBABILITY_TOLERANCE = 1e-9


class ModelError(ValueError):
    """Raised when a model, an interval set or a policy breaks its invariants."""


class SpecKind(Enum):
    REACH = "reach"
    REACH_AVOID = "reach_avoid"
    EXPECTED_REWARD = "expected_reward"


class Direction(Enum):
    MAX = "max"
    MIN = "min"


class Semantics(Enum):
    EXACT = "exact"
    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


class PolicyKind(Enum):
    DETERMINISTIC = "deterministic"
    RANDOMIZED = "randomized"


@dataclass(frozen=True)
class Specification:
    kind: SpecKind
    target_states: frozenset
    avoid_states: frozenset = frozenset()
    direction: Direction = Direction.MAX
    semantics: Semantics = Semantics.EXACT
    target_name: str = field(default="target", compare=False)
    avoid_name: str = field(default="avoid", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "target_states", frozenset(self.target_states))
        object.__setattr__(self, "avoid_states", frozenset(self.avoid_states))
        if not self.target_states:
            raise ModelError("Specification needs at least one target state.")
        if self.target_states & self.avoid_states:
            raise ModelError("Target and avoid states must be disjoint.")
        if self.avoid_states and self.kind != SpecKind.REACH_AVOID:
            raise ModelError("Avoid states are only allowed in reach-avoid specifications.")

    @property
    def is_reward(self):
        return self.kind == SpecKind.EXPECTED_REWARD

    @property
    def maximizes(self):
        return self.direction == Direction.MAX

    def with_semantics(self, semantics):
        return replace(self, semantics=semantics)

    def nature_minimizes(self):
        """Whether nature pushes the objective down inside the intervals."""
        if self.semantics == Semantics.PESSIMISTIC:
            return self.maximizes
        if self.semantics == Semantics.OPTIMISTIC:
            return not self.maximizes
        return True

    def meets_threshold(self, value, threshold):
        if threshold is None:
            return False
        return value >= threshold if self.maximizes else value <= threshold

    def describe(self):
        prefix = "R" if self.is_reward else "P"
        agent = "Max" if self.maximizes else "Min"
        if self.semantics == Semantics.OPTIMISTIC:
            agent += agent
        elif self.semantics == Semantics.PESSIMISTIC:
            agent += "Min" if self.maximizes else "Max"
        if self.kind == SpecKind.REACH_AVOID:
            formula = f"!{self.avoid_name} U {self.target_name}"
        else:
            formula = f"F {self.target_name}"
        return f"{prefix}_{agent}({formula})"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def raise_if_invalid(self, what="model"):
        if self.violations:
            raise ModelError(f"Invalid {what}: " + "; ".join(self.violations))


class _GraphMixin:
    """Shared queries over the sparse (state, action) -> successors table."""

    def pairs(self):
        for state in range(self.n_states):
            for action in self.enabled[state]:
                yield state, action

    def support(self, state, action):
        return tuple(entry[0] for entry in self.edges[(state, action)])

    @property
    def n_transitions(self):
        return sum(len(entries) for entries in self.edges.values())

    def reward(self, state, action):
        return self.rewards.get((state, action), 0.0)

    def state_name(self, state):
        if self.state_labels:
            return self.state_labels[state]
        return str(state)

    def action_name(self, action):
        return self.actions[action]

    def state_index(self, label):
        if self.state_labels and label in self.state_labels:
            return self.state_labels.index(label)
        if not self.state_labels and str(label).isdigit() and int(label) < self.n_states:
            return int(label)
        raise ModelError(f"Unknown state label: {label}")

    def is_markov_chain(self):
        return all(len(actions) == 1 for actions in self.enabled)

    def _normalize_structure(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "state_labels", tuple(self.state_labels))
        object.__setattr__(self, "enabled", tuple(tuple(sorted(actions)) for actions in self.enabled))
        object.__setattr__(self, "rewards", {key: float(value) for key, value in self.rewards.items()})


@dataclass(frozen=True)
class Mdp(_GraphMixin):
    n_states: int
    initial_state: int
    actions: tuple
    enabled: tuple
    transitions: dict
    rewards: dict = field(default_factory=dict)
    state_labels: tuple = ()

    def __post_init__(self):
        self._normalize_structure()
        normalized = {
            (int(s), int(a)): tuple(sorted((int(t), float(p)) for t, p in entries))
            for (s, a), entries in self.transitions.items()
        }
        object.__setattr__(self, "transitions", normalized)

    @property
    def edges(self):
        return self.transitions

    def probability(self, state, action, successor):
        for target, prob in self.transitions[(state, action)]:
            if target == successor:
                return prob
        return 0.0


@dataclass(frozen=True)
class UncertainMdp(_GraphMixin):
    n_states: int
    initial_state: int
    actions: tuple
    enabled: tuple
    interval_transitions: dict
    rewards: dict = field(default_factory=dict)
    state_labels: tuple = ()

    def __post_init__(self):
        self._normalize_structure()
        normalized = {
            (int(s), int(a)): tuple(sorted((int(t), float(lo), float(hi)) for t, lo, hi in entries))
            for (s, a), entries in self.interval_transitions.items()
        }
        object.__setattr__(self, "interval_transitions", normalized)

    @property
    def edges(self):
        return self.interval_transitions

    def interval(self, state, action, successor):
        for target, lower, upper in self.interval_transitions[(state, action)]:
            if target == successor:
                return lower, upper
        raise ModelError(f"No transition {state} -{action}-> {successor}")


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    mapping: dict

    @classmethod
    def deterministic(cls, mapping):
        return cls(PolicyKind.DETERMINISTIC, {int(s): int(a) for s, a in mapping.items()})

    @classmethod
    def randomized(cls, mapping):
        weights = {
            int(s): tuple((int(a), float(w)) for a, w in sorted(dict(dist).items()))
            for s, dist in mapping.items()
        }
        return cls(PolicyKind.RANDOMIZED, weights)

    @property
    def is_deterministic(self):
        return self.kind == PolicyKind.DETERMINISTIC

    def action(self, state):
        if not self.is_deterministic:
            raise ModelError("A randomized policy has no single action per state.")
        return self.mapping[state]

    def distribution(self, state):
        if state not in self.mapping:
            raise ModelError(f"Policy is undefined at state {state}")
        if self.is_deterministic:
            return ((self.mapping[state], 1.0),)
        return self.mapping[state]


@dataclass(frozen=True)
class StateClassification:
    prob0: frozenset
    prob1: frozenset
    reward_divergent: frozenset = frozenset()
    zero_reward_components: tuple = ()


def is_point_interval(lower, upper):
    return lower == 1.0 and upper == 1.0


def _pair_name(model, state, action):
    return f"({model.state_name(state)},{model.action_name(action)})"


def _check_structure(model, report):
    if not 0 <= model.initial_state < model.n_states:
        report.violations.append(f"initial state {model.initial_state} out of range")
    if len(model.enabled) != model.n_states:
        report.violations.append(
            f"enabled-action table has {len(model.enabled)} rows for {model.n_states} states"
        )
        return False
    for state, actions in enumerate(model.enabled):
        if not actions:
            report.violations.append(f"no enabled action at {model.state_name(state)}")
        for action in actions:
            if not 0 <= action < len(model.actions):
                report.violations.append(f"unknown action index {action} at {model.state_name(state)}")
            elif (state, action) not in model.edges or not model.edges[(state, action)]:
                report.violations.append(f"no transitions at {_pair_name(model, state, action)}")
    enabled_pairs = set(model.pairs())
    for key in model.edges:
        if key not in enabled_pairs:
            report.violations.append(f"transitions listed for disabled pair {key}")
    for key, value in model.rewards.items():
        if key not in enabled_pairs:
            report.violations.append(f"reward listed for disabled pair {key}")
        elif value < 0 or math.isnan(value):
            report.violations.append(f"negative reward {value} at {_pair_name(model, *key)}")
    return True


def _check_successors(model, state, action, successors, report):
    name = _pair_name(model, state, action)
    if len(set(successors)) != len(successors):
        report.violations.append(f"duplicate successor at {name}")
    for successor in successors:
        if not 0 <= successor < model.n_states:
            report.violations.append(f"successor {successor} out of range at {name}")


def validate_mdp(mdp):
    report = ValidationReport()
    if not _check_structure(mdp, report):
        return report
    enabled_pairs = set(mdp.pairs())
    for (state, action), entries in mdp.transitions.items():
        if (state, action) not in enabled_pairs:
            continue
        name = _pair_name(mdp, state, action)
        _check_successors(mdp, state, action, [t for t, _ in entries], report)
        for successor, prob in entries:
            if prob == 0.0:
                report.violations.append(f"zero-probability successor {mdp.state_name(successor)} at {name}")
            elif not 0.0 <= prob <= 1.0:
                report.violations.append(f"probability {prob:.10g} outside [0,1] at {name}")
        total = math.fsum(prob for _, prob in entries)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            report.violations.append(f"sum {total:.10g} ≠ 1 at {name}")
    return report


def validate_umdp(umdp, companion=None):
    report = ValidationReport()
    if not _check_structure(umdp, report):
        return report
    for (state, action), entries in umdp.interval_transitions.items():
        name = _pair_name(umdp, state, action)
        _check_successors(umdp, state, action, [t for t, _, _ in entries], report)
        for successor, lower, upper in entries:
            where = f"{name}->{umdp.state_name(successor)}"
            if lower <= 0.0:
                report.violations.append(f"zero lower bound at {where}")
            if lower > upper:
                report.violations.append(f"lower bound {lower:.10g} above upper bound {upper:.10g} at {where}")
            if upper > 1.0:
                report.violations.append(f"upper bound {upper:.10g} above 1 at {where}")
        lower_sum = math.fsum(lower for _, lower, _ in entries)
        upper_sum = math.fsum(upper for _, _, upper in entries)
        if lower_sum > 1.0 + PROBABILITY_TOLERANCE:
            report.violations.append(f"lower sum {lower_sum:.10g} > 1 at {name}")
        if upper_sum < 1.0 - PROBABILITY_TOLERANCE:
            report.violations.append(f"upper sum {upper_sum:.10g} < 1 at {name}")
    if companion is not None:
        try:
            check_same_support(companion, umdp)
        except ModelError as e:
            report.violations.append(str(e))
    return report


def validate_policy(model, policy):
    report = ValidationReport()
    for state in range(model.n_states):
        if state not in policy.mapping:
            report.violations.append(f"policy undefined at {model.state_name(state)}")
            continue
        weights = policy.distribution(state)
        for action, weight in weights:
            if action not in model.enabled[state] and weight > 0:
                report.violations.append(
                    f"action {action} is not enabled at {model.state_name(state)}"
                )
            if weight < 0:
                report.violations.append(f"negative weight at {model.state_name(state)}")
        total = math.fsum(weight for _, weight in weights)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            report.violations.append(f"policy weights sum to {total:.10g} at {model.state_name(state)}")
    return report


def check_same_support(reference, other):
    """Raise ModelError unless both models have the same states, actions and successor sets."""
    if reference.n_states != other.n_states:
        raise ModelError(f"support mismatch: {reference.n_states} vs {other.n_states} states")
    if reference.enabled != other.enabled:
        raise ModelError("support mismatch: enabled actions differ")
    for state, action in reference.pairs():
        if reference.support(state, action) != other.support(state, action):
            raise ModelError(f"support mismatch at {_pair_name(reference, state, action)}")


def point_umdp(mdp):
    """Lift an Mdp to the uncertain MDP whose intervals are the exact probabilities."""
    intervals = {
        key: tuple((t, p, p) for t, p in entries) for key, entries in mdp.transitions.items()
    }
    return UncertainMdp(
        n_states=mdp.n_states,
        initial_state=mdp.initial_state,
        actions=mdp.actions,
        enabled=mdp.enabled,
        interval_transitions=intervals,
        rewards=dict(mdp.rewards),
        state_labels=mdp.state_labels,
    )


def initial_prior_umdp(graph_of, epsilon=1e-4, strength=(5, 10)):
    """Build the prior uMDP from the support of graph_of.

    Probability-one transitions become the immutable point interval [1,1], every
    other supported transition gets [epsilon, 1-epsilon] together with the prior
    strength interval. Only the support of graph_of is read.
    Returns (UncertainMdp, {(state, action, successor): (n_lo, n_hi)}).
    """
    if not 0.0 < epsilon < 0.5:
        raise ModelError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    n_lo, n_hi = strength
    if not 1 <= n_lo <= n_hi:
        raise ModelError(f"strength interval must satisfy 1 <= n_lo <= n_hi, got {strength}")
    validate_mdp(graph_of).raise_if_invalid("graph source")

    intervals = {}
    strengths = {}
    for state, action in graph_of.pairs():
        successors = graph_of.support(state, action)
        if len(successors) == 1:
            intervals[(state, action)] = ((successors[0], 1.0, 1.0),)
            continue
        intervals[(state, action)] = tuple((t, epsilon, 1.0 - epsilon) for t in successors)
        for successor in successors:
            strengths[(state, action, successor)] = (int(n_lo), int(n_hi))

    prior = UncertainMdp(
        n_states=graph_of.n_states,
        initial_state=graph_of.initial_state,
        actions=graph_of.actions,
        enabled=graph_of.enabled,
        interval_transitions=intervals,
        rewards=dict(graph_of.rewards),
        state_labels=graph_of.state_labels,
    )
    validate_umdp(prior).raise_if_invalid("prior uMDP")
    logger.debug(f"Built prior uMDP with {len(strengths)} uncertain transitions (epsilon={epsilon})")
    return prior, strengths


def induce_markov_chain(mdp, policy):
    """Resolve the choices of mdp with policy; the result has one action per state."""
    transitions = {}
    rewards = {}
    for state in range(mdp.n_states):
        mixture = {}
        reward = 0.0
        for action, weight in policy.distribution(state):
            if weight == 0.0:
                continue
            if action not in mdp.enabled[state]:
                raise ModelError(
                    f"Policy uses disabled action {action} at {mdp.state_name(state)}"
                )
            for successor, prob in mdp.transitions[(state, action)]:
                mixture[successor] = mixture.get(successor, 0.0) + weight * prob
            reward += weight * mdp.reward(state, action)
        transitions[(state, 0)] = tuple((t, p) for t, p in mixture.items() if p > 0.0)
        if reward:
            rewards[(state, 0)] = reward
    return Mdp(
        n_states=mdp.n_states,
        initial_state=mdp.initial_state,
        actions=("policy",),
        enabled=tuple((0,) for _ in range(mdp.n_states)),
        transitions=transitions,
        rewards=rewards,
        state_labels=mdp.state_labels,
    )
# ramdp/exploration.py

import bisect
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate

import numpy as np

from .learners import CountTable
from .models import Mdp, ModelError, Policy, Semantics
from .solver import exact_value_iteration, robust_value_iteration

logger = logging.getLogger('Ramdp')


class Termination(Enum):
    TARGET_REACHED = "target_reached"
    ABSORBING_NON_TARGET = "absorbing_non_target"
    HORIZON = "horizon"


@dataclass(frozen=True)
class Trajectory:
    steps: tuple
    terminated_by: Termination

    def __len__(self):
        return len(self.steps)


@dataclass
class ScheduleState:
    global_counts: CountTable = field(default_factory=CountTable)
    iteration_counts: CountTable = field(default_factory=CountTable)
    trajectories_done: int = 0
    steps_done: int = 0


def make_rng(seed, repetition=0):
    """Independent PCG64 stream per (seed, repetition)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(repetition,)))


class SamplingOracle:
    """Samples successors of the true MDP; the learner never reads its probabilities."""

    def __init__(self, mdp):
        self._mdp = mdp
        self._tables = self._cumulative_tables(mdp)
        self.trajectories_started = 0

    @staticmethod
    def _cumulative_tables(mdp):
        tables = {}
        for key, entries in mdp.transitions.items():
            successors = tuple(t for t, _ in entries)
            tables[key] = (successors, list(accumulate(p for _, p in entries)))
        return tables

    @property
    def current_mdp(self):
        return self._mdp

    def begin_trajectory(self):
        self.trajectories_started += 1

    def _active_tables(self):
        return self._tables

    def sample(self, state, action, rng):
        successors, cumulative = self._active_tables()[(state, action)]
        index = bisect.bisect_right(cumulative, rng.random())
        return successors[min(index, len(successors) - 1)]


def restart_states(spec, classification):
    """States where a trajectory stops: value already settled by the graph."""
    if spec.is_reward:
        return frozenset(spec.target_states) | classification.reward_divergent
    return classification.prob0 | classification.prob1


def _draw_action(policy, state, rng):
    choices = policy.distribution(state)
    if len(choices) == 1:
        return choices[0][0]
    u = rng.random()
    cumulative = 0.0
    for action, weight in choices:
        cumulative += weight
        if u < cumulative:
            return action
    return choices[-1][0]


def sample_trajectory(oracle, policy, spec, classification, horizon, rng, graph=None):
    """Follow policy from the initial state until a stop state or the horizon.

    When graph is given, every sampled successor must lie in its support.
    """
    stop = restart_states(spec, classification)
    state = oracle.current_mdp.initial_state
    if state in spec.target_states:
        return Trajectory((), Termination.TARGET_REACHED)
    if state in stop:
        return Trajectory((), Termination.ABSORBING_NON_TARGET)

    steps = []
    for _ in range(horizon):
        action = _draw_action(policy, state, rng)
        successor = oracle.sample(state, action, rng)
        if graph is not None and successor not in graph.support(state, action):
            raise ModelError(
                f"Environment moved {graph.state_name(state)} to unsupported successor "
                f"{graph.state_name(successor)}"
            )
        steps.append((state, action, successor))
        state = successor
        if state in spec.target_states:
            return Trajectory(tuple(steps), Termination.TARGET_REACHED)
        if state in stop:
            return Trajectory(tuple(steps), Termination.ABSORBING_NON_TARGET)
    return Trajectory(tuple(steps), Termination.HORIZON)


def doubling_reached(global_counts, iteration_counts, on_transitions=False):
    """True once some pair visited this iteration has at least doubled its global count."""
    for key, count in iteration_counts.pair_counts.items():
        if count and count >= max(1, global_counts.pair_counts.get(key, 0)):
            return True
    if on_transitions:
        for key, count in iteration_counts.transition_counts.items():
            if count and count >= max(1, global_counts.transition_counts.get(key, 0)):
                return True
    return False


def run_iteration(schedule, oracle, policy, spec, classification, horizon, budget, rng,
                  on_transitions=False, graph=None):
    """Sample trajectories until the doubling condition holds or the budget is spent.

    Returns (new schedule, this iteration's counts). The iteration counts are merged
    into the global counts of the new schedule and its iteration counters start empty.
    """
    iteration_counts = schedule.iteration_counts.copy()
    trajectories = 0
    steps = 0
    while trajectories < budget:
        oracle.begin_trajectory()
        trajectory = sample_trajectory(oracle, policy, spec, classification, horizon, rng, graph)
        trajectories += 1
        steps += len(trajectory)
        for state, action, successor in trajectory.steps:
            iteration_counts.add(state, action, successor)
        if doubling_reached(schedule.global_counts, iteration_counts, on_transitions):
            break

    logger.debug(f"Iteration ran {trajectories} trajectories with {steps} steps")
    new_schedule = ScheduleState(
        global_counts=schedule.global_counts.merged(iteration_counts),
        trajectories_done=schedule.trajectories_done + trajectories,
        steps_done=schedule.steps_done + steps,
    )
    return new_schedule, iteration_counts


def optimistic_policy(model, spec, tolerance=None, max_iterations=None, classification=None):
    """Greedy policy for the most favourable instance of the learned model.

    classification may be passed when it is already known for the model's support.
    """
    if isinstance(model, Mdp):
        result = exact_value_iteration(
            model, spec.with_semantics(Semantics.EXACT), tolerance, max_iterations, classification
        )
    else:
        result = robust_value_iteration(
            model, spec.with_semantics(Semantics.OPTIMISTIC), tolerance, max_iterations, classification
        )
    return result.policy


def randomize_policy(policy, model, xi):
    """Keep the chosen action with probability xi and spread the rest uniformly."""
    if not 0.0 <= xi <= 1.0:
        raise ModelError(f"xi must lie in [0, 1], got {xi}")
    mapping = {}
    for state in range(model.n_states):
        enabled = model.enabled[state]
        chosen = policy.action(state)
        if len(enabled) == 1:
            mapping[state] = {chosen: 1.0}
            continue
        spread = (1.0 - xi) / (len(enabled) - 1)
        mapping[state] = {action: (xi if action == chosen else spread) for action in enabled}
    return Policy.randomized(mapping)


def uniform_policy(model):
    return Policy.randomized(
        {
            state: {action: 1.0 / len(model.enabled[state]) for action in model.enabled[state]}
            for state in range(model.n_states)
        }
    )

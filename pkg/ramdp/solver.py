# ramdp/solver.py

import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config_loader import get_setting
from .graph_utils import classify_states, qualitative_strategy
from .models import (
    Mdp,
    ModelError,
    Policy,
    Semantics,
    induce_markov_chain,
    validate_mdp,
    validate_umdp,
)

logger = logging.getLogger('Ramdp')

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERATIONS = 100000
DEFAULT_ACCELERATION_INTERVAL = 50
EVALUATION_TOLERANCE = 1e-9
FEASIBILITY_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12
ROUNDOFF_RELATIVE = 1e-9
JUMP_ROUNDS = 5


class InnerDirection(Enum):
    ADVERSARIAL_MIN = "min"
    ADVERSARIAL_MAX = "max"


@dataclass(frozen=True)
class SolveResult:
    values: np.ndarray
    policy: Policy
    iterations: int
    residual: float
    converged: bool = True
    nature: dict = field(default_factory=dict, compare=False, repr=False)

    def value_at(self, state):
        return float(self.values[state])


def inner_extreme_distribution(intervals, values, direction):
    """Pick the distribution inside the intervals that minimizes or maximizes the expectation.

    Every successor starts at its lower bound and the remaining mass goes to the
    successors in order of increasing value (ADVERSARIAL_MIN) or decreasing value
    (ADVERSARIAL_MAX), ties broken by position.
    """
    if not intervals or len(intervals) != len(values):
        raise ModelError("Interval and value lists must be non-empty and of equal length.")
    lowers = [float(lower) for lower, _ in intervals]
    uppers = [float(upper) for _, upper in intervals]
    if any(lower > upper for lower, upper in zip(lowers, uppers)):
        raise ModelError("Infeasible interval set: a lower bound exceeds its upper bound.")
    lower_sum = math.fsum(lowers)
    upper_sum = math.fsum(uppers)
    if lower_sum > 1.0 + FEASIBILITY_TOLERANCE or upper_sum < 1.0 - FEASIBILITY_TOLERANCE:
        raise ModelError(
            f"Infeasible interval set: lower sum {lower_sum:.10g}, upper sum {upper_sum:.10g}"
        )

    positions = range(len(values))
    if direction == InnerDirection.ADVERSARIAL_MIN:
        order = sorted(positions, key=lambda i: (values[i], i))
    else:
        order = sorted(positions, key=lambda i: (-values[i], i))

    distribution = list(lowers)
    residual = 1.0 - lower_sum
    for i in order:
        if residual <= 0.0:
            break
        extra = min(uppers[i] - lowers[i], residual)
        distribution[i] += extra
        residual -= extra
    return distribution


@dataclass
class _PairTable:
    pair_state: np.ndarray
    pair_action: np.ndarray
    starts: np.ndarray
    successors: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    valid: np.ndarray
    reward: np.ndarray


def _compile(model):
    pairs = list(model.pairs())
    width = max(len(model.edges[pair]) for pair in pairs)
    n_pairs = len(pairs)
    table = _PairTable(
        pair_state=np.array([s for s, _ in pairs], dtype=np.int64),
        pair_action=np.array([a for _, a in pairs], dtype=np.int64),
        starts=np.zeros(model.n_states, dtype=np.int64),
        successors=np.zeros((n_pairs, width), dtype=np.int64),
        lower=np.zeros((n_pairs, width)),
        upper=np.zeros((n_pairs, width)),
        valid=np.zeros((n_pairs, width), dtype=bool),
        reward=np.array([model.reward(s, a) for s, a in pairs]),
    )
    point = isinstance(model, Mdp)
    for row, pair in enumerate(pairs):
        for col, entry in enumerate(model.edges[pair]):
            if point:
                successor, lower = entry
                upper = lower
            else:
                successor, lower, upper = entry
            table.successors[row, col] = successor
            table.lower[row, col] = lower
            table.upper[row, col] = upper
            table.valid[row, col] = True
    first_rows = np.flatnonzero(np.r_[True, table.pair_state[1:] != table.pair_state[:-1]])
    table.starts = first_rows
    return table


class _Sweeper:
    """One Bellman backup over all (state, action) pairs at a time."""

    def __init__(self, table, spec, classification, nature_min):
        self.table = table
        self.spec = spec
        self.maximize = spec.maximizes
        self.nature_min = nature_min
        n_states = len(table.starts)
        self.pinned = np.zeros(n_states, dtype=bool)
        self.pinned_values = np.zeros(n_states)
        self.components = [np.array(sorted(c), dtype=np.int64) for c in classification.zero_reward_components]
        self.internal_rows = np.zeros(len(table.pair_state), dtype=bool)
        self.targets = sorted(spec.target_states)
        self.incoming = None
        if spec.is_reward:
            divergent = sorted(classification.reward_divergent)
            self.pinned[self.targets] = True
            self.pinned[divergent] = True
            self.pinned_values[divergent] = np.inf
            blocked_succ = np.isin(table.successors, divergent) & table.valid
            self.blocked_pairs = blocked_succ.any(axis=1)
            if not self.maximize:
                self._mark_internal_rows(n_states)
                self.incoming = [[] for _ in range(n_states)]
                for row, col in zip(*np.nonzero(table.valid)):
                    self.incoming[int(table.successors[row, col])].append(int(row))
        else:
            prob0 = sorted(classification.prob0)
            prob1 = sorted(classification.prob1)
            self.pinned[prob0] = True
            self.pinned[prob1] = True
            self.pinned_values[prob1] = 1.0
            self.blocked_pairs = np.zeros(len(table.pair_state), dtype=bool)

    def _mark_internal_rows(self, n_states):
        """Zero-reward rows that stay inside the end component of their state."""
        if not self.components:
            return
        table = self.table
        owner = np.full(n_states, -1, dtype=np.int64)
        for number, members in enumerate(self.components):
            owner[members] = number
        row_owner = owner[table.pair_state]
        succ_owner = np.where(table.valid, owner[table.successors], row_owner[:, None])
        inside = (succ_owner == row_owner[:, None]).all(axis=1)
        self.internal_rows = (row_owner >= 0) & (table.reward == 0.0) & inside

    def initial_values(self):
        values = np.zeros(len(self.pinned))
        values[self.pinned] = self.pinned_values[self.pinned]
        return values

    def backup(self, values):
        table = self.table
        finite = np.where(np.isfinite(values), values, 0.0)
        succ_values = np.where(table.valid, finite[table.successors], 0.0)
        keys = succ_values if self.nature_min else -succ_values
        order = np.argsort(keys, axis=1, kind="stable")
        lower_sorted = np.take_along_axis(table.lower, order, axis=1)
        width_sorted = np.take_along_axis(table.upper - table.lower, order, axis=1)
        residual = 1.0 - table.lower.sum(axis=1)
        before = np.cumsum(width_sorted, axis=1) - width_sorted
        extra = np.clip(residual[:, None] - before, 0.0, width_sorted)
        dist = np.empty_like(lower_sorted)
        np.put_along_axis(dist, order, lower_sorted + extra, axis=1)
        q_values = (dist * succ_values).sum(axis=1)
        if self.spec.is_reward:
            q_values = q_values + table.reward
        q_values[self.blocked_pairs] = np.inf
        # moves inside a zero-reward end component are free; only its exits set the value
        q_values[self.internal_rows] = np.inf
        return q_values, dist

    def reduce(self, q_values):
        if self.maximize:
            values = np.maximum.reduceat(q_values, self.table.starts)
        else:
            values = np.minimum.reduceat(q_values, self.table.starts)
        for members in self.components:
            values[members] = values[members].min()
        values[self.pinned] = self.pinned_values[self.pinned]
        return values

    def greedy_rows(self, q_values, values):
        """First row per state whose Q value ties with the state value.

        Minimized rewards instead grow an attractor from the targets over the
        tied rows, so the chosen rows never loop forever at zero cost.
        """
        table = self.table
        best = values[table.pair_state]
        scale = np.maximum(1.0, np.abs(np.where(np.isfinite(best), best, 0.0)))
        with np.errstate(invalid="ignore"):
            close = np.abs(q_values - best) <= TIE_TOLERANCE * scale
        ties = close | (q_values == best)
        if self.incoming is not None:
            return self._attractor_rows(q_values, ties | self.internal_rows)
        candidates = np.where(ties, np.arange(len(q_values)), len(q_values))
        rows = np.minimum.reduceat(candidates, table.starts)
        # pinned states may hold no matching row; fall back to the first one
        missing = rows >= len(q_values)
        rows[missing] = table.starts[missing]
        return rows

    def _attractor_rows(self, q_values, ties):
        """Backward search from the targets, tied rows first, then the cheapest finite row."""
        table = self.table
        rows = table.starts.copy()
        reached = set(self.targets)
        frontier = []

        def enter(state):
            for row in self.incoming[state]:
                owner = int(table.pair_state[row])
                if owner in reached or self.pinned[owner]:
                    continue
                if ties[row]:
                    heapq.heappush(frontier, (0, 0.0, row))
                elif np.isfinite(q_values[row]):
                    heapq.heappush(frontier, (1, float(q_values[row]), row))

        for target in self.targets:
            enter(target)
        while frontier:
            _, _, row = heapq.heappop(frontier)
            state = int(table.pair_state[row])
            if state in reached:
                continue
            reached.add(state)
            rows[state] = row
            enter(state)
        return rows


def _residual(new_values, old_values):
    with np.errstate(invalid="ignore"):
        diff = np.abs(new_values - old_values)
    diff[np.isnan(diff)] = 0.0
    return float(diff.max()) if diff.size else 0.0


def _magnitude(values):
    finite = values[np.isfinite(values)]
    return float(np.abs(finite).max()) if finite.size else 0.0


def _greedy_solution(sweeper, q_values, dist, values, tolerance):
    """Values of the greedy (policy, nature) pair by a linear solve, or None."""
    table = sweeper.table
    n_states = len(values)
    rows = sweeper.greedy_rows(q_values, sweeper.reduce(q_values))
    free = ~sweeper.pinned

    matrix = np.zeros((n_states, n_states))
    chosen = table.successors[rows]
    weights = np.where(table.valid[rows], dist[rows], 0.0)
    np.add.at(matrix, (np.repeat(np.arange(n_states), chosen.shape[1]), chosen.ravel()), weights.ravel())
    rhs = table.reward[rows] if sweeper.spec.is_reward else np.zeros(n_states)

    pinned_values = np.where(np.isfinite(sweeper.pinned_values), sweeper.pinned_values, 0.0)
    system = np.eye(int(free.sum())) - matrix[np.ix_(free, free)]
    offset = rhs[free] + matrix[np.ix_(free, sweeper.pinned)] @ pinned_values[sweeper.pinned]
    try:
        solution = np.linalg.solve(system, offset)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(solution)) or np.any(solution < -tolerance):
        return None
    candidate = values.copy()
    candidate[free] = solution
    return candidate


def _exact_jump(sweeper, q_values, dist, values, tolerance, rounds=JUMP_ROUNDS):
    """Jump to the exact values of the greedy (policy, nature) pair.

    A candidate is kept only when one more sweep moves it by at most tolerance;
    values too large for an absolute tolerance are checked at float resolution
    instead. A rejected candidate seeds the next round with its own greedy pair.
    Returns (values, residual) or None.
    """
    if sweeper.pinned.all():
        return None
    for _ in range(rounds):
        candidate = _greedy_solution(sweeper, q_values, dist, values, tolerance)
        if candidate is None:
            return None
        q_values, dist = sweeper.backup(candidate)
        swept = sweeper.reduce(q_values)
        residual = _residual(swept, candidate)
        if residual <= max(tolerance, ROUNDOFF_RELATIVE * _magnitude(swept)):
            return swept, residual
        values = candidate
    return None


def _extract_policy(sweeper, q_values, strategy):
    rows = sweeper.greedy_rows(q_values, sweeper.reduce(q_values))
    mapping = {int(state): int(sweeper.table.pair_action[row]) for state, row in enumerate(rows)}
    mapping.update(strategy)
    return Policy.deterministic(mapping)


def _extract_nature(sweeper, dist):
    table = sweeper.table
    nature = {}
    for row in range(len(table.pair_state)):
        key = (int(table.pair_state[row]), int(table.pair_action[row]))
        nature[key] = tuple(
            (int(table.successors[row, col]), float(dist[row, col]))
            for col in range(table.successors.shape[1])
            if table.valid[row, col]
        )
    return nature


def _solve(model, spec, nature_min, tolerance, max_iterations, classification=None):
    tolerance = tolerance if tolerance is not None else get_setting("solver", "tolerance", DEFAULT_TOLERANCE)
    if max_iterations is None:
        max_iterations = get_setting("solver", "max_iterations", DEFAULT_MAX_ITERATIONS, int)
    interval = get_setting("solver", "acceleration_interval", DEFAULT_ACCELERATION_INTERVAL, int)
    accelerate = interval > 0 and (spec.is_reward or model.is_markov_chain())

    classification = classification or classify_states(model, spec)
    strategy = qualitative_strategy(model, spec, classification)
    sweeper = _Sweeper(_compile(model), spec, classification, nature_min)

    values = sweeper.initial_values()
    residual = math.inf
    converged = False
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        q_values, dist = sweeper.backup(values)
        new_values = sweeper.reduce(q_values)
        residual = _residual(new_values, values)
        values = new_values
        if residual <= tolerance:
            converged = True
            break
        if accelerate and (iterations == 1 or iterations % interval == 0):
            jump = _exact_jump(sweeper, q_values, dist, values, tolerance)
            if jump is not None:
                values, residual = jump
                iterations += 1
                converged = True
                logger.debug(f"Linear solve accepted after {iterations} sweeps")
                break

    if not converged:
        logger.warning(
            f"Value iteration stopped after {iterations} sweeps with residual {residual:.3g} "
            f"(tolerance {tolerance:.3g})"
        )

    q_values, dist = sweeper.backup(values)
    return SolveResult(
        values=values,
        policy=_extract_policy(sweeper, q_values, strategy),
        iterations=iterations,
        residual=residual,
        converged=converged,
        nature=_extract_nature(sweeper, dist),
    )


def robust_value_iteration(umdp, spec, tolerance=None, max_iterations=None, classification=None):
    """Optimal robust values and a deterministic memoryless policy for an uncertain MDP."""
    if spec.semantics == Semantics.EXACT:
        raise ModelError("Robust value iteration needs optimistic or pessimistic semantics.")
    validate_umdp(umdp).raise_if_invalid("uncertain MDP")
    return _solve(umdp, spec, spec.nature_minimizes(), tolerance, max_iterations, classification)


def exact_value_iteration(mdp, spec, tolerance=None, max_iterations=None, classification=None):
    if spec.semantics != Semantics.EXACT:
        raise ModelError("Exact value iteration needs exact semantics.")
    validate_mdp(mdp).raise_if_invalid("MDP")
    return _solve(mdp, spec, True, tolerance, max_iterations, classification)


def evaluate_policy(mdp, policy, spec, tolerance=EVALUATION_TOLERANCE, max_iterations=None):
    """Exact value of policy on mdp from the initial state."""
    chain = induce_markov_chain(mdp, policy)
    result = exact_value_iteration(
        chain, spec.with_semantics(Semantics.EXACT), tolerance=tolerance, max_iterations=max_iterations
    )
    return result.value_at(mdp.initial_state)


def solve_model(model, spec, tolerance=None, max_iterations=None):
    """Dispatch to the exact or robust solver by model type."""
    if isinstance(model, Mdp):
        return exact_value_iteration(model, spec.with_semantics(Semantics.EXACT), tolerance, max_iterations)
    semantics = spec.semantics if spec.semantics != Semantics.EXACT else Semantics.PESSIMISTIC
    return robust_value_iteration(model, spec.with_semantics(semantics), tolerance, max_iterations)

# ramdp/environments.py

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .exploration import SamplingOracle
from .model_io import save_model
from .models import (
    Direction,
    Mdp,
    ModelError,
    SpecKind,
    Specification,
    check_same_support,
    validate_mdp,
)

logger = logging.getLogger('Ramdp')

LAYOUT_DIR = Path(__file__).resolve().parent / "layouts"

CHAIN_SKEW = 0.95
BETS = (0, 1, 2, 5, 10)
MOVES = {"north": (-1, 0), "east": (0, 1), "south": (1, 0), "west": (0, -1)}
SIDES = {"N": "north", "E": "east", "S": "south", "W": "west"}
GRID_INTENT = 0.55
GRID_SLIP = 0.15


@dataclass(frozen=True)
class EnvironmentSpecSheet:
    key: str
    name: str
    builder: object
    parameters: dict = field(default_factory=dict)
    known_optimum: float = None
    provenance: str = ""

    def build(self):
        return self.builder(**self.parameters)


class _ModelBuilder:
    """Collects labelled states and actions, then freezes them into an Mdp."""

    def __init__(self, actions):
        self.actions = tuple(actions)
        self.labels = []
        self.index = {}
        self.transitions = {}
        self.rewards = {}

    def state(self, label):
        if label not in self.index:
            self.index[label] = len(self.labels)
            self.labels.append(label)
        return self.index[label]

    def add(self, label, action, successors, reward=0.0):
        state = self.state(label)
        merged = {}
        for successor, prob in successors.items():
            target = self.state(successor)
            merged[target] = merged.get(target, 0.0) + prob
        key = (state, self.actions.index(action))
        self.transitions[key] = tuple(merged.items())
        if reward:
            self.rewards[key] = float(reward)

    def build(self, initial_label):
        enabled = [[] for _ in self.labels]
        for state, action in self.transitions:
            enabled[state].append(action)
        mdp = Mdp(
            n_states=len(self.labels),
            initial_state=self.index[initial_label],
            actions=self.actions,
            enabled=tuple(tuple(actions) for actions in enabled),
            transitions=self.transitions,
            rewards=self.rewards,
            state_labels=tuple(self.labels),
        )
        validate_mdp(mdp).raise_if_invalid("environment")
        return mdp


def build_chain(n_states=30, swapped=False):
    """Chain where only the skewed forward action avoids an exponential number of resets."""
    if n_states < 2:
        raise ModelError(f"Chain needs at least 2 states, got {n_states}")
    builder = _ModelBuilder(("a", "b", "c", "stay"))
    forward = {"a": CHAIN_SKEW, "b": 1.0 - CHAIN_SKEW, "c": 0.5}
    if swapped:
        forward["a"], forward["b"] = forward["b"], forward["a"]
    for i in range(n_states - 1):
        for action, advance in forward.items():
            builder.add(f"c{i}", action, {f"c{i + 1}": advance, "c0": 1.0 - advance}, reward=1.0)
    last = f"c{n_states - 1}"
    builder.add(last, "stay", {last: 1.0}, reward=1.0)
    mdp = builder.build("c0")
    spec = Specification(
        SpecKind.EXPECTED_REWARD,
        {mdp.state_index(last)},
        direction=Direction.MIN,
        target_name=last,
    )
    return mdp, spec


def build_betting_game(win_prob=0.8, rounds=6, start_coins=10):
    """Six rounds of betting; the coins held after the last round are collected as reward."""
    if not 0.0 < win_prob < 1.0:
        raise ModelError(f"win_prob must lie in (0, 1), got {win_prob}")
    builder = _ModelBuilder([f"bet{b}" for b in BETS] + ["collect", "stay"])
    builder.state(f"r0_c{start_coins}")
    holdings = {start_coins}
    for r in range(rounds):
        reached = set()
        for coins in sorted(holdings):
            for bet in BETS:
                if bet > coins:
                    continue
                if bet == 0:
                    successors = {f"r{r + 1}_c{coins}": 1.0}
                    reached.add(coins)
                else:
                    successors = {
                        f"r{r + 1}_c{coins + bet}": win_prob,
                        f"r{r + 1}_c{coins - bet}": 1.0 - win_prob,
                    }
                    reached.update((coins + bet, coins - bet))
                builder.add(f"r{r}_c{coins}", f"bet{bet}", successors)
        holdings = reached
    done = []
    for coins in sorted(holdings):
        builder.add(f"r{rounds}_c{coins}", "collect", {f"done_c{coins}": 1.0}, reward=coins)
        builder.add(f"done_c{coins}", "stay", {f"done_c{coins}": 1.0})
        done.append(f"done_c{coins}")
    mdp = builder.build(f"r0_c{start_coins}")
    spec = Specification(
        SpecKind.EXPECTED_REWARD,
        {mdp.state_index(label) for label in done},
        direction=Direction.MAX,
        target_name="done",
    )
    return mdp, spec


def _read_layout(name):
    """key value... lines of a bundled layout; repeated keys are collected in order."""
    entries = {}
    path = LAYOUT_DIR / name
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].split()
            if line:
                entries.setdefault(line[0], []).append(line[1:])
    return entries


def _cell(values):
    return int(values[0]), int(values[1])


def build_grid(layout="grid.txt"):
    """Slippery grid world: reach the goal without falling into a trap."""
    entries = _read_layout(layout)
    rows = int(entries["rows"][0][0])
    cols = int(entries["cols"][0][0])
    start = _cell(entries["start"][0])
    goal = _cell(entries["goal"][0])
    traps = {_cell(values) for values in entries.get("trap", [])}
    fences = set()
    for r, c, side in entries.get("fence", []):
        r, c = int(r), int(c)
        dr, dc = MOVES[SIDES[side]]
        fences.add(frozenset({(r, c), (r + dr, c + dc)}))

    def label(cell):
        return f"r{cell[0]}c{cell[1]}"

    def step(cell, move):
        dr, dc = MOVES[move]
        nxt = (cell[0] + dr, cell[1] + dc)
        if not (0 <= nxt[0] < rows and 0 <= nxt[1] < cols):
            return cell
        if frozenset({cell, nxt}) in fences:
            return cell
        return nxt

    builder = _ModelBuilder(list(MOVES) + ["stay"])
    for r in range(rows):
        for c in range(cols):
            builder.state(label((r, c)))
    for r in range(rows):
        for c in range(cols):
            cell = (r, c)
            if cell == goal or cell in traps:
                builder.add(label(cell), "stay", {label(cell): 1.0})
                continue
            for intended in MOVES:
                successors = {}
                for move in MOVES:
                    prob = GRID_INTENT if move == intended else GRID_SLIP
                    target = label(step(cell, move))
                    successors[target] = successors.get(target, 0.0) + prob
                builder.add(label(cell), intended, successors)

    mdp = builder.build(label(start))
    spec = Specification(
        SpecKind.REACH_AVOID,
        {mdp.state_index(label(goal))},
        avoid_states={mdp.state_index(label(trap)) for trap in traps},
        direction=Direction.MAX,
        target_name="goal",
        avoid_name="trap",
    )
    return mdp, spec


def build_bandit(arms=99):
    builder = _ModelBuilder([f"arm{i}" for i in range(1, arms + 1)] + ["stay"])
    for label in ("start", "success", "failure"):
        builder.state(label)
    for i in range(1, arms + 1):
        p = i / (arms + 1)
        builder.add("start", f"arm{i}", {"success": p, "failure": 1.0 - p})
    builder.add("success", "stay", {"success": 1.0})
    builder.add("failure", "stay", {"failure": 1.0})
    mdp = builder.build("start")
    spec = Specification(SpecKind.REACH, {mdp.state_index("success")}, target_name="success")
    return mdp, spec


def _aircraft_parameters(layout):
    entries = _read_layout(layout)
    return {key: values[0][0] for key, values in entries.items()}


def build_aircraft(layout="aircraft.txt", **overrides):
    """Own aircraft steers on an altitude ladder while an intruder drifts at random.

    The encounter is decided after the last approach step: sharing an altitude
    is a collision, anything else means the aircraft passed each other.
    """
    params = _aircraft_parameters(layout)
    params.update({key: str(value) for key, value in overrides.items()})
    altitudes = int(params["altitudes"])
    steps = int(params["approach_steps"])
    climb = float(params["climb_success"])
    drift = {
        1: float(params["intruder_up"]),
        -1: float(params["intruder_down"]),
        0: float(params["intruder_stay"]),
    }
    if altitudes < 1 or steps < 1:
        raise ModelError("Aircraft layout needs at least one altitude and one approach step")

    def own_moves(height):
        moves = {"level": {height: 1.0}}
        if height < altitudes - 1:
            moves["climb"] = {height + 1: climb, height: 1.0 - climb}
        if height > 0:
            moves["descend"] = {height - 1: climb, height: 1.0 - climb}
        return moves

    def intruder_moves(height):
        moves = {}
        for delta, prob in drift.items():
            nxt = height + delta
            if not 0 <= nxt < altitudes:
                nxt = height
            moves[nxt] = moves.get(nxt, 0.0) + prob
        return moves

    def label(t, h, g):
        return f"t{t}_h{h}_g{g}"

    builder = _ModelBuilder(("climb", "descend", "level", "stay"))
    origin = (0, int(params["own_start"]), int(params["intruder_start"]))
    builder.state(label(*origin))
    for terminal in ("passed", "collision"):
        builder.state(terminal)
        builder.add(terminal, "stay", {terminal: 1.0})

    queue = deque([origin])
    seen = {origin}
    while queue:
        t, h, g = queue.popleft()
        for action, own in own_moves(h).items():
            successors = {}
            for h2, p_own in own.items():
                for g2, p_intruder in intruder_moves(g).items():
                    if t + 1 == steps:
                        target = "collision" if h2 == g2 else "passed"
                    else:
                        nxt = (t + 1, h2, g2)
                        target = label(*nxt)
                        if nxt not in seen:
                            seen.add(nxt)
                            queue.append(nxt)
                    successors[target] = successors.get(target, 0.0) + p_own * p_intruder
            builder.add(label(t, h, g), action, successors)

    mdp = builder.build(label(*origin))
    spec = Specification(
        SpecKind.REACH_AVOID,
        {mdp.state_index("passed")},
        avoid_states={mdp.state_index("collision")},
        direction=Direction.MAX,
        target_name="passed",
        avoid_name="collision",
    )
    return mdp, spec


def build_example():
    """Single-decision model: a1 reaches the target with 0.7, a2 never does."""
    builder = _ModelBuilder(("a1", "a2", "stay"))
    builder.add("s0", "a1", {"s1": 0.7, "s2": 0.3})
    builder.add("s0", "a2", {"s2": 0.1, "s3": 0.9})
    for label in ("s1", "s2", "s3"):
        builder.add(label, "stay", {label: 1.0})
    mdp = builder.build("s0")
    return mdp, Specification(SpecKind.REACH, {mdp.state_index("s1")}, target_name="s1")


ENVIRONMENTS = (
    EnvironmentSpecSheet("chain", "chain", build_chain, {"n_states": 30},
                         provenance="optimum by exact value iteration"),
    EnvironmentSpecSheet("betting_favourable", "betting_game", build_betting_game, {"win_prob": 0.8}),
    EnvironmentSpecSheet("betting_unfavourable", "betting_game", build_betting_game, {"win_prob": 0.2}),
    EnvironmentSpecSheet("grid", "grid", build_grid),
    EnvironmentSpecSheet("bandit", "bandit", build_bandit, known_optimum=0.99,
                         provenance="best arm succeeds with 99/100"),
    EnvironmentSpecSheet("aircraft", "aircraft", build_aircraft),
)

EXTRA_ENVIRONMENTS = (
    EnvironmentSpecSheet("example", "example", build_example, known_optimum=0.7,
                         provenance="action a1 reaches s1 with 0.7"),
    EnvironmentSpecSheet("chain_swapped", "chain", build_chain, {"n_states": 30, "swapped": True}),
)

ENVIRONMENT_KEYS = tuple(sheet.key for sheet in ENVIRONMENTS + EXTRA_ENVIRONMENTS)


def get_spec_sheet(key):
    for sheet in ENVIRONMENTS + EXTRA_ENVIRONMENTS:
        if sheet.key == key:
            return sheet
    raise ModelError(f"Unknown environment '{key}'. Known: {', '.join(ENVIRONMENT_KEYS)}")


@lru_cache(maxsize=None)
def get_environment(key):
    """(Mdp, Specification) for an environment key; built once per process."""
    mdp, spec = get_spec_sheet(key).build()
    logger.debug(f"Built environment {key}: {mdp.n_states} states, {mdp.n_transitions} transitions")
    return mdp, spec


@dataclass(frozen=True)
class SwitchingEnvironment:
    env_a: Mdp
    env_b: Mdp
    switch_after: int

    def __post_init__(self):
        if self.switch_after < 0:
            raise ModelError(f"switch_after must be >= 0, got {self.switch_after}")
        check_same_support(self.env_a, self.env_b)
        if self.env_a.initial_state != self.env_b.initial_state:
            raise ModelError("Switching environments must share the initial state")
        if self.env_a.rewards != self.env_b.rewards:
            raise ModelError("Switching environments must share the reward structure")


class SwitchingOracle(SamplingOracle):
    """Serves env_a for the first switch_after trajectories and env_b afterwards."""

    def __init__(self, switching):
        super().__init__(switching.env_a)
        self._switching = switching
        self._tables_b = self._cumulative_tables(switching.env_b)
        self._active = self._tables

    def _serves_b(self, trajectory_index):
        return trajectory_index >= self._switching.switch_after

    @property
    def current_mdp(self):
        if self._serves_b(self.trajectories_started):
            return self._switching.env_b
        return self._switching.env_a

    def begin_trajectory(self):
        self._active = self._tables_b if self._serves_b(self.trajectories_started) else self._tables
        if self.trajectories_started == self._switching.switch_after:
            logger.debug(f"Environment switches at trajectory {self.trajectories_started}")
        super().begin_trajectory()

    def _active_tables(self):
        return self._active


def switching_oracle(switching):
    return SwitchingOracle(switching)


def export_environment(key, path):
    mdp, _ = get_environment(key)
    save_model(mdp, path)
    return mdp

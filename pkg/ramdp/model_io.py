# ramdp/model_io.py
"""Line-based text format for MDPs, interval MDPs and policies.

    # comment
    I <state>                          initial state, exactly once
    T <state> <action> <succ> <p>      MDP transition
    T <state> <action> <succ> <lo> <hi>  interval transition
    R <state> <action> <reward>        optional, default 0

States and actions are labels. When every state token is a non-negative
integer the tokens are used as indices, otherwise states are numbered in
order of first appearance as the source of a T record (states that never
act come last) and the tokens become state labels.
"""

import logging
import math
from pathlib import Path

from .models import (
    PROBABILITY_TOLERANCE,
    Mdp,
    ModelError,
    UncertainMdp,
    validate_mdp,
    validate_umdp,
)

logger = logging.getLogger('Ramdp')


def _parse_float(token, source, line_no):
    try:
        return float(token)
    except ValueError:
        raise ModelError(f"{source}:{line_no}: expected a number, got {token!r}") from None


def _index_tokens(tokens):
    """Return (index map, labels) following the integer-or-first-appearance rule."""
    ordered = list(dict.fromkeys(tokens))
    if ordered and all(token.isdigit() for token in ordered):
        return {token: int(token) for token in ordered}, ()
    return {token: i for i, token in enumerate(ordered)}, tuple(ordered)


def parse_model(text, source="<string>"):
    """Parse the text format into an Mdp (5-token T records) or an UncertainMdp (6 tokens)."""
    transitions = []
    rewards = []
    initial = []
    widths = set()
    source_tokens = []
    state_tokens = []
    action_tokens = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        record = tokens[0]
        if record == "T":
            if len(tokens) not in (5, 6):
                raise ModelError(f"{source}:{line_no}: T record needs 4 or 5 fields")
            widths.add(len(tokens))
            numbers = tuple(_parse_float(token, source, line_no) for token in tokens[4:])
            transitions.append((line_no, tokens[1], tokens[2], tokens[3], numbers))
            source_tokens.append(tokens[1])
            state_tokens.append(tokens[3])
            action_tokens.append(tokens[2])
        elif record == "R":
            if len(tokens) != 4:
                raise ModelError(f"{source}:{line_no}: R record needs 3 fields")
            rewards.append((line_no, tokens[1], tokens[2], _parse_float(tokens[3], source, line_no)))
            state_tokens.append(tokens[1])
            action_tokens.append(tokens[2])
        elif record == "I":
            if len(tokens) != 2:
                raise ModelError(f"{source}:{line_no}: I record needs 1 field")
            initial.append(tokens[1])
            state_tokens.append(tokens[1])
        else:
            raise ModelError(f"{source}:{line_no}: unknown record type {record!r}")

    if not transitions:
        raise ModelError(f"{source}: no transitions")
    if len(widths) > 1:
        raise ModelError(f"{source}: mixes point and interval transitions")
    if len(initial) != 1:
        raise ModelError(f"{source}: expected exactly one I record, found {len(initial)}")

    state_index, state_labels = _index_tokens(source_tokens + state_tokens)
    ordered_actions = list(dict.fromkeys(action_tokens))
    if all(token.isdigit() for token in ordered_actions):
        ordered_actions.sort(key=int)
    action_index = {token: i for i, token in enumerate(ordered_actions)}
    n_states = max(state_index.values()) + 1

    edges = {}
    for line_no, state, action, successor, numbers in transitions:
        key = (state_index[state], action_index[action])
        entries = edges.setdefault(key, {})
        target = state_index[successor]
        if target in entries:
            raise ModelError(f"{source}:{line_no}: duplicate transition {state} {action} {successor}")
        entries[target] = numbers

    reward_table = {}
    for line_no, state, action, value in rewards:
        key = (state_index[state], action_index[action])
        if key not in edges:
            raise ModelError(f"{source}:{line_no}: reward for {state} {action} without transitions")
        reward_table[key] = value

    enabled = [[] for _ in range(n_states)]
    for state, action in edges:
        enabled[state].append(action)

    common = dict(
        n_states=n_states,
        initial_state=state_index[initial[0]],
        actions=tuple(ordered_actions),
        enabled=tuple(tuple(actions) for actions in enabled),
        rewards=reward_table,
        state_labels=state_labels,
    )

    if widths == {6}:
        intervals = {
            key: tuple((t, lo, hi) for t, (lo, hi) in entries.items()) for key, entries in edges.items()
        }
        model = UncertainMdp(interval_transitions=intervals, **common)
        validate_umdp(model).raise_if_invalid(f"uncertain MDP in {source}")
    else:
        model = Mdp(transitions=_normalize_probabilities(edges, state_labels, ordered_actions), **common)
        validate_mdp(model).raise_if_invalid(f"MDP in {source}")

    logger.debug(f"Parsed {source}: {model.n_states} states, {model.n_transitions} transitions")
    return model


def _normalize_probabilities(edges, state_labels, actions):
    """Rescale rows within the tolerance of 1; other rows are left for validation to reject."""
    normalized = {}
    for (state, action), entries in edges.items():
        total = math.fsum(p for (p,) in entries.values())
        if total != 1.0 and abs(total - 1.0) <= PROBABILITY_TOLERANCE:
            label = state_labels[state] if state_labels else state
            logger.debug(f"Renormalizing ({label},{actions[action]}) from sum {total!r}")
            normalized[(state, action)] = tuple((t, p / total) for t, (p,) in entries.items())
        else:
            normalized[(state, action)] = tuple((t, p) for t, (p,) in entries.items())
    return normalized


def load_model(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"❌ Cannot read model file {path}: {e}")
        raise
    return parse_model(text, source=str(path))


def format_model(model):
    lines = [f"# {model.n_states} states, {model.n_transitions} transitions"]
    lines.append(f"I {model.state_name(model.initial_state)}")
    for state, action in model.pairs():
        prefix = f"T {model.state_name(state)} {model.action_name(action)}"
        for entry in model.edges[(state, action)]:
            numbers = " ".join(repr(number) for number in entry[1:])
            lines.append(f"{prefix} {model.state_name(entry[0])} {numbers}")
    for state, action in model.pairs():
        reward = model.reward(state, action)
        if reward:
            lines.append(f"R {model.state_name(state)} {model.action_name(action)} {reward!r}")
    return "\n".join(lines) + "\n"


def save_model(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_model(model), encoding="utf-8")
    logger.info(f"Wrote model with {model.n_states} states to {path}")


def format_policy(model, policy):
    lines = []
    for state in range(model.n_states):
        choices = policy.distribution(state)
        actions = " ".join(
            model.action_name(action) if weight == 1.0 else f"{model.action_name(action)}:{weight!r}"
            for action, weight in choices
        )
        lines.append(f"{model.state_name(state)} {actions}")
    return "\n".join(lines) + "\n"


def save_policy(model, policy, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_policy(model, policy), encoding="utf-8")
    logger.info(f"Wrote policy to {path}")

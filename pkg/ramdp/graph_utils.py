# ramdp/graph_utils.py

import logging
from collections import deque

from .models import Direction, StateClassification

logger = logging.getLogger('Ramdp')


def predecessors(model):
    """Map each state to the (state, action) pairs that can move into it."""
    incoming = {state: [] for state in range(model.n_states)}
    for state, action in model.pairs():
        for successor in model.support(state, action):
            incoming[successor].append((state, action))
    return incoming


def _backward_reach(model, seeds, blocked, incoming=None):
    incoming = incoming if incoming is not None else predecessors(model)
    reached = set(seeds)
    queue = deque(reached)
    while queue:
        current = queue.popleft()
        for state, _ in incoming[current]:
            if state in reached or state in blocked:
                continue
            reached.add(state)
            queue.append(state)
    return reached


def prob0_a(model, targets, avoid=frozenset()):
    """States from which no policy reaches targets with positive probability."""
    can_reach = _backward_reach(model, targets, blocked=set(avoid) | set(targets))
    return frozenset(range(model.n_states)) - can_reach


def _attract_within(model, targets, avoid, region):
    """Grow targets by states with an action that stays in region and may hit the attractor.

    Returns the attractor and the action that pulled each state in.
    """
    attractor = set(targets)
    strategy = {}
    changed = True
    while changed:
        changed = False
        for state, action in model.pairs():
            if state in attractor or state in avoid or state not in region:
                continue
            successors = model.support(state, action)
            if all(t in region for t in successors) and any(t in attractor for t in successors):
                attractor.add(state)
                strategy[state] = action
                changed = True
    return attractor, strategy


def prob1_e(model, targets, avoid=frozenset()):
    """States with a policy reaching targets almost surely (greatest fixpoint)."""
    region = set(range(model.n_states)) - prob0_a(model, targets, avoid)
    while True:
        attractor, _ = _attract_within(model, targets, avoid, region)
        if attractor == region:
            return frozenset(region)
        region = attractor


def prob0_e(model, targets, avoid=frozenset()):
    """States with a policy that never reaches targets."""
    forced = set(targets)
    changed = True
    while changed:
        changed = False
        for state in range(model.n_states):
            if state in forced or state in avoid:
                continue
            if all(
                any(t in forced for t in model.support(state, action))
                for action in model.enabled[state]
            ):
                forced.add(state)
                changed = True
    return frozenset(range(model.n_states)) - forced


def prob1_a(model, targets, avoid=frozenset()):
    """States from which every policy reaches targets almost surely."""
    escape = prob0_e(model, targets, avoid)
    can_escape = _backward_reach(model, escape, blocked=set(targets))
    return frozenset(range(model.n_states)) - can_escape


def strongly_connected_components(nodes, successors):
    """Tarjan's algorithm with an explicit stack.

    successors maps every node to the nodes it has edges to, all of them in nodes.
    """
    index = {}
    low = {}
    stack = []
    on_stack = set()
    components = []
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = len(index)
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors[root]))]
        while work:
            node, children = work[-1]
            descended = False
            for child in children:
                if child not in index:
                    index[child] = low[child] = len(index)
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(successors[child])))
                    descended = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if descended:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.add(member)
                    if member == node:
                        break
                components.append(frozenset(component))
    return components


def zero_reward_end_components(model, region):
    """Maximal end components built from zero-reward actions that never leave region.

    Inside one component the controller moves between any two states for free,
    so a minimizing objective gives all of them the same value.
    """
    region = set(region)
    actions = {
        state: [
            action for action in model.enabled[state]
            if model.reward(state, action) == 0.0
            and all(t in region for t in model.support(state, action))
        ]
        for state in region
    }
    while True:
        live = sorted(state for state, kept in actions.items() if kept)
        live_set = set(live)
        graph = {
            state: sorted({t for action in actions[state] for t in model.support(state, action) if t in live_set})
            for state in live
        }
        components = strongly_connected_components(live, graph)
        owner = {state: component for component in components for state in component}
        changed = False
        for state in live:
            kept = [
                action for action in actions[state]
                if all(t in owner[state] for t in model.support(state, action))
            ]
            if len(kept) != len(actions[state]):
                actions[state] = kept
                changed = True
        if not changed:
            return tuple(sorted(components, key=min))


def classify_states(model, spec):
    """Pin down the states whose value follows from the graph alone.

    Reach objectives: prob0 gets value 0 and prob1 gets value 1 under the
    spec's direction. Avoid states are absorbing for the objective and land in
    prob0. Reward objectives additionally get reward_divergent, the states
    with infinite value (the target is missed with positive probability).
    Minimized rewards also list the zero-reward end components of the finite
    states, which value iteration has to treat as single states.
    """
    targets = spec.target_states
    avoid = spec.avoid_states
    all_states = frozenset(range(model.n_states))

    if spec.direction == Direction.MAX:
        prob0 = prob0_a(model, targets, avoid)
        prob1 = prob1_e(model, targets, avoid)
    else:
        prob0 = prob0_e(model, targets, avoid)
        prob1 = prob1_a(model, targets, avoid)

    if spec.is_reward:
        if spec.direction == Direction.MAX:
            finite = prob1_a(model, targets)
            components = ()
        else:
            finite = prob1_e(model, targets)
            components = zero_reward_end_components(model, finite - targets)
        if components:
            logger.debug(f"Found {len(components)} zero-reward end components")
        return StateClassification(
            prob0=prob0,
            prob1=prob1,
            reward_divergent=all_states - finite,
            zero_reward_components=components,
        )

    classification = StateClassification(prob0=prob0 | avoid, prob1=prob1)
    logger.debug(
        f"Classified {model.n_states} states: {len(classification.prob0)} at 0, "
        f"{len(classification.prob1)} at 1"
    )
    return classification


def qualitative_strategy(model, spec, classification):
    """Actions that keep the graph-level guarantee of the classification.

    Max reachability: an attractor action for every non-target prob1 state.
    Min reachability: an action staying inside prob0 for every prob0 state.
    Value iteration alone can pick a self-looping action in these states.
    """
    if spec.is_reward:
        return {}
    targets = spec.target_states
    avoid = spec.avoid_states
    if spec.direction == Direction.MAX:
        _, strategy = _attract_within(model, targets, avoid, set(classification.prob1))
        return strategy

    strategy = {}
    for state in sorted(classification.prob0 - avoid):
        for action in model.enabled[state]:
            if all(t in classification.prob0 for t in model.support(state, action)):
                strategy[state] = action
                break
    return strategy

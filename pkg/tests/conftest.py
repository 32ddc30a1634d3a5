# tests/conftest.py

import pytest

from ramdp.environments import build_example
from ramdp.models import Mdp, UncertainMdp


@pytest.fixture
def example():
    """s0 chooses a1 (0.7 to the target s1) or a2 (never reaches it); s1..s3 absorb."""
    return build_example()


@pytest.fixture
def example_umdp(example):
    mdp, _ = example
    return UncertainMdp(
        n_states=4,
        initial_state=0,
        actions=mdp.actions,
        enabled=mdp.enabled,
        interval_transitions={
            (0, 0): ((1, 0.6, 0.8), (2, 0.2, 0.4)),
            (0, 1): ((2, 0.05, 0.2), (3, 0.8, 0.95)),
            (1, 2): ((1, 1.0, 1.0),),
            (2, 2): ((2, 1.0, 1.0),),
            (3, 2): ((3, 1.0, 1.0),),
        },
        state_labels=mdp.state_labels,
    )


@pytest.fixture
def coin_loop():
    """One stochastic pair: state 0 retries with 0.5 until it reaches the absorbing state 1."""
    return Mdp(
        n_states=2,
        initial_state=0,
        actions=("flip", "stay"),
        enabled=((0,), (1,)),
        transitions={(0, 0): ((0, 0.5), (1, 0.5)), (1, 1): ((1, 1.0),)},
        rewards={(0, 0): 1.0},
        state_labels=("s0", "s1"),
    )

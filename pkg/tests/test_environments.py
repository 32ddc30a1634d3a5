# tests/test_environments.py

import pytest

from ramdp.environments import (
    ENVIRONMENT_KEYS,
    ENVIRONMENTS,
    SwitchingEnvironment,
    build_aircraft,
    build_bandit,
    build_betting_game,
    build_chain,
    build_grid,
    export_environment,
    get_environment,
    get_spec_sheet,
    switching_oracle,
)
from ramdp.exploration import make_rng
from ramdp.model_io import load_model
from ramdp.models import ModelError, validate_mdp
from ramdp.solver import exact_value_iteration


@pytest.mark.parametrize("sheet", ENVIRONMENTS, ids=lambda sheet: sheet.key)
def test_every_environment_is_a_valid_mdp(sheet):
    mdp, spec = sheet.build()
    assert validate_mdp(mdp).ok
    assert spec.target_states
    assert mdp.state_labels


def test_sizes():
    assert get_environment("chain")[0].n_states == 30
    betting = get_environment("betting_favourable")[0]
    assert (betting.n_states, betting.n_transitions) == (300, 1502)
    grid = get_environment("grid")[0]
    assert (grid.n_states, grid.n_transitions) == (100, 1450)
    bandit = get_environment("bandit")[0]
    assert bandit.n_states == 3
    assert len(bandit.enabled[bandit.initial_state]) == 99


def test_chain_rewards_every_step():
    mdp, spec = build_chain(n_states=5)
    assert all(mdp.rewards[pair] == 1.0 for pair in mdp.pairs())
    assert spec.target_states == {4}
    assert dict(mdp.transitions[(0, mdp.actions.index("a"))]) == {1: 0.95, 0: pytest.approx(0.05)}


def test_swapped_chain_keeps_the_support():
    mdp, _ = build_chain()
    swapped, _ = build_chain(swapped=True)
    a = mdp.actions.index("a")
    assert mdp.support(0, a) == swapped.support(0, a)
    assert dict(swapped.transitions[(0, a)])[1] == pytest.approx(0.05)


def test_chain_needs_two_states():
    with pytest.raises(ModelError):
        build_chain(n_states=1)


def test_bandit_best_arm():
    mdp, spec = build_bandit()
    result = exact_value_iteration(mdp, spec)
    assert result.value_at(mdp.initial_state) == pytest.approx(0.99)
    assert result.policy.action(mdp.initial_state) == mdp.actions.index("arm99")


def test_betting_bet_zero_is_deterministic():
    mdp, _ = build_betting_game()
    bet0 = mdp.actions.index("bet0")
    assert len(mdp.support(mdp.initial_state, bet0)) == 1


def test_betting_rejects_degenerate_odds():
    with pytest.raises(ModelError, match="win_prob"):
        build_betting_game(win_prob=1.0)


def test_grid_corner_slips_into_the_wall():
    mdp, spec = build_grid()
    corner = mdp.state_index("r0c0")
    north = dict(mdp.transitions[(corner, mdp.actions.index("north"))])
    assert north[corner] == pytest.approx(0.7)
    assert north[mdp.state_index("r0c1")] == pytest.approx(0.15)
    assert mdp.initial_state == corner
    assert len(spec.avoid_states) == 5


def test_grid_fence_blocks_both_directions():
    mdp, _ = build_grid()
    below = mdp.state_index("r9c1")
    above = mdp.state_index("r8c1")
    assert above not in mdp.support(below, mdp.actions.index("north"))
    assert below not in mdp.support(above, mdp.actions.index("south"))


def test_aircraft_with_one_altitude_always_collides():
    mdp, spec = build_aircraft(altitudes=1, own_start=0, intruder_start=0)
    assert exact_value_iteration(mdp, spec).value_at(mdp.initial_state) == 0.0


def test_aircraft_can_avoid_the_intruder():
    mdp, spec = get_environment("aircraft")
    value = exact_value_iteration(mdp, spec).value_at(mdp.initial_state)
    assert 0.0 < value < 1.0


def test_spec_sheet_lookup():
    assert get_spec_sheet("bandit").known_optimum == 0.99
    assert "example" in ENVIRONMENT_KEYS
    with pytest.raises(ModelError, match="Unknown environment 'maze'"):
        get_spec_sheet("maze")


def test_export_writes_a_loadable_model(tmp_path):
    path = tmp_path / "chain.txt"
    mdp = export_environment("chain", path)
    loaded = load_model(path)
    assert (loaded.n_states, loaded.n_transitions) == (mdp.n_states, mdp.n_transitions)


def test_switching_requires_the_same_support():
    chain, _ = get_environment("chain")
    bandit, _ = get_environment("bandit")
    with pytest.raises(ModelError, match="support mismatch"):
        SwitchingEnvironment(chain, bandit, 10)
    with pytest.raises(ModelError, match="switch_after"):
        SwitchingEnvironment(chain, chain, -1)


def test_switching_oracle_changes_the_served_model():
    chain, _ = get_environment("chain")
    swapped, _ = get_environment("chain_swapped")
    oracle = switching_oracle(SwitchingEnvironment(chain, swapped, 2))
    a = chain.actions.index("a")
    rng = make_rng(5)

    served = []
    for _ in range(4):
        assert oracle.current_mdp is (swapped if oracle.trajectories_started >= 2 else chain)
        oracle.begin_trajectory()
        served.append(sum(oracle.sample(0, a, rng) == 1 for _ in range(2000)) / 2000)
    assert served[0] == pytest.approx(0.95, abs=0.03)
    assert served[1] == pytest.approx(0.95, abs=0.03)
    assert served[2] == pytest.approx(0.05, abs=0.03)
    assert served[3] == pytest.approx(0.05, abs=0.03)

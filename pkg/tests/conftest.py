import dataclasses

import numpy as np
import pytest

from minifoot.env import Mode, SimConfig, reset


def make_state(config=None, **changes):
    """Kickoff state edited in place of a hand-built one; arrays are copied."""
    config = config or SimConfig(players_per_team=3)
    base = reset(config, 0)
    fields = {}
    for name in ("pos", "vel", "facing", "sprinting", "ball_pos", "ball_vel"):
        fields[name] = np.array(changes.pop(name, getattr(base, name)), dtype=getattr(base, name).dtype)
    changes.setdefault("mode", Mode.IN_PLAY)
    return dataclasses.replace(base, **fields, **changes)


@pytest.fixture
def cfg3():
    return SimConfig(players_per_team=3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def play_script(state, script, rng=None):
    """Play ``script`` (list of (left actions, right actions)) from ``state``; returns (states, Replay)."""
    from minifoot.env import Replay, step

    rng = rng if rng is not None else np.random.default_rng(0)
    states, joint, events = [state], [], []
    for left, right in script:
        state, ev = step(state, left, right, rng)
        states.append(state)
        joint.append((list(left), list(right)))
        events.extend(ev)
    return states, Replay.from_states(states, joint, events)


def pass_goal_script():
    """L1 passes to L2, L2 waits and scores; 9 transitions.

    Transition indices: 0 pass attempt, 6 pass complete, 8 shot and goal.
    Keeper skill 0 and a huge shot range make the shot a near-certain goal;
    the fixture asserts that it went in.
    """
    from minifoot.env import ActionId, SimConfig, lineup_positions

    cfg = SimConfig(players_per_team=3, offside_enabled=False, keeper_skill=0.0, shot_range=100.0,
                    episode_length=50)
    pos = lineup_positions(cfg)
    pos[0, 1] = (0.5, 0.0)
    pos[0, 2] = (0.9, 0.1)
    pos[1, 1] = (-0.2, 0.3)
    pos[1, 2] = (-0.4, -0.3)
    state = make_state(cfg, pos=pos, ball_pos=pos[0, 1], owner=(0, 1))
    idle = [0, 0]
    script = [([int(ActionId.SHORT_PASS), 0], idle)] + [(idle, idle)] * 7
    script += [([0, int(ActionId.SHOT)], idle)]
    states, replay = play_script(state, script)
    assert states[9].score == (1, 0), "fixture shot must score"
    return states, replay


# acceptance verdicts, filled by tests/test_acceptance.py and printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status:4s}  {detail}")

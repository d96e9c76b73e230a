"""Canonical event stream derived from a transition."""
from __future__ import annotations

from typing import List

from ..errors import ContractError
from .state import Event, EventKind, Mode, WorldState


def detect_events(prev: WorldState, actions, nxt: WorldState) -> List[Event]:
    """Translate the ball-contact log of ``nxt`` into canonical events.

    Every ownership change between ``prev`` and ``nxt`` must be explained by
    the log; anything else (skipped steps, score jumps, unexplained owner
    changes) is a contract error. Events are stamped with ``prev.step``, the
    step at which the actions were taken.
    """
    if nxt.step != prev.step + 1:
        raise ContractError(f"states are not consecutive: {prev.step} -> {nxt.step}")
    if nxt.config != prev.config:
        raise ContractError("states come from different configurations")
    d_left = nxt.score[0] - prev.score[0]
    d_right = nxt.score[1] - prev.score[1]
    if d_left < 0 or d_right < 0 or d_left + d_right > 1:
        raise ContractError(f"impossible score change {prev.score} -> {nxt.score}")
    if actions is not None:
        F = prev.config.field_players
        if any(len(a) != F for a in actions):
            raise ContractError("action lists do not match the team size")

    t = prev.step
    out: List[Event] = []
    owner = prev.owner
    goals = [0, 0]
    for touch in nxt.touches:
        kind = touch[0]
        if kind == "illegal":
            out.append(Event(t, EventKind.ILLEGAL_ACTION, touch[1]))
        elif kind == "pass":
            passer, receiver = touch[1], touch[2]
            if owner != passer:
                raise ContractError(f"{passer} passed without owning the ball")
            out.append(Event(t, EventKind.PASS_ATTEMPT, passer, receiver))
            owner = None
        elif kind == "offside":
            out.append(Event(t, EventKind.OFFSIDE_CALL, touch[1], touch[2]))
        elif kind == "freekick":
            kicker, passer = touch[1], touch[2]
            out.append(Event(t, EventKind.POSSESSION_LOST, passer, kicker))
            out.append(Event(t, EventKind.POSSESSION_GAINED, kicker, passer))
            owner = kicker
        elif kind == "claim":
            player, passer = touch[1], touch[2]
            if owner is not None:
                raise ContractError(f"{player} claimed a ball owned by {owner}")
            if passer is None or player == passer:
                out.append(Event(t, EventKind.POSSESSION_GAINED, player))
            elif player[0] == passer[0]:
                out.append(Event(t, EventKind.PASS_COMPLETE, passer, player))
            else:
                out.append(Event(t, EventKind.PASS_INTERCEPTED, passer, player))
                out.append(Event(t, EventKind.POSSESSION_GAINED, player, passer))
            owner = player
        elif kind == "tackle":
            winner, loser = touch[1], touch[2]
            if owner != loser:
                raise ContractError(f"tackle on {loser} who does not own the ball")
            out.append(Event(t, EventKind.TACKLE_WON, winner, loser))
            out.append(Event(t, EventKind.POSSESSION_LOST, loser, winner))
            owner = winner
        elif kind == "shot":
            if owner != touch[1]:
                raise ContractError(f"{touch[1]} shot without owning the ball")
            out.append(Event(t, EventKind.SHOT_ATTEMPT, touch[1]))
        elif kind == "goal":
            scorer, assister = touch[1], touch[2]
            out.append(Event(t, EventKind.GOAL, scorer, assister))
            goals[scorer[0]] += 1
            owner = nxt.owner
            if nxt.mode != Mode.KICKOFF or nxt.owner is None or nxt.owner[0] == scorer[0]:
                raise ContractError("goal not followed by the conceding team's kickoff")
        elif kind == "save":
            keeper, shooter = touch[1], touch[2]
            out.append(Event(t, EventKind.POSSESSION_LOST, shooter, keeper))
            out.append(Event(t, EventKind.POSSESSION_GAINED, keeper, shooter))
            owner = keeper
        else:
            raise ContractError(f"unknown touch record {touch!r}")
    if owner != nxt.owner:
        raise ContractError(f"unexplained ownership change {prev.owner} -> {nxt.owner}")
    if goals != [d_left, d_right]:
        raise ContractError("score change without a matching goal event")
    return out


def is_done_boundary(events) -> bool:
    """A goal closes a bootstrap chain."""
    return any(e.kind == EventKind.GOAL for e in events)

"""Ball-ownership game graph: possession segments linked by events."""
from __future__ import annotations

import collections
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..env.replay import Replay
from ..env.state import Event


@dataclass(frozen=True)
class PossessionSegment:
    team: int
    player: int
    start: int  # first state index owned
    end: int    # one past the last state index owned

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Edge:
    event: Event
    src: Optional[int]  # index of the segment the ball came from
    dst: Optional[int]  # index of the segment the ball went to (None while loose)


@dataclass
class GameGraph:
    segments: List[PossessionSegment]
    edges: List[Edge]
    num_states: int
    team_counts: Dict[int, Dict[str, int]] = field(default_factory=dict)
    player_counts: Dict[Tuple[int, int], Dict[str, int]] = field(default_factory=dict)

    @property
    def events(self) -> List[Event]:
        return [e.event for e in self.edges]

    def kinds(self) -> collections.Counter:
        return collections.Counter(e.event.kind.value for e in self.edges)

    def recount(self):
        """Team and player counters recomputed from the edges."""
        teams: Dict[int, Dict[str, int]] = {0: {}, 1: {}}
        players: Dict[Tuple[int, int], Dict[str, int]] = {}
        for edge in self.edges:
            ev = edge.event
            k = ev.kind.value
            teams[ev.actor[0]][k] = teams[ev.actor[0]].get(k, 0) + 1
            d = players.setdefault(tuple(ev.actor), {})
            d[k] = d.get(k, 0) + 1
        return teams, players

    def check(self) -> None:
        """Raise ValueError if the graph violates its structural invariants."""
        last = 0
        for seg in self.segments:
            if seg.start < last or seg.end <= seg.start:
                raise ValueError("segments overlap or are out of order")
            last = seg.end
        if last > self.num_states:
            raise ValueError("segment beyond the replay")
        for edge in self.edges:
            for idx in (edge.src, edge.dst):
                if idx is not None and not 0 <= idx < len(self.segments):
                    raise ValueError("edge refers to a missing segment")
        if (self.team_counts, self.player_counts) != self.recount():
            raise ValueError("counters disagree with edges")


def possession_segments(owners: Sequence[Optional[tuple]]) -> List[PossessionSegment]:
    out = []
    cur, start = None, 0
    for t, o in enumerate(list(owners) + [None]):
        o = None if o is None else (int(o[0]), int(o[1]))
        if o != cur:
            if cur is not None:
                out.append(PossessionSegment(cur[0], cur[1], start, t))
            cur, start = o, t
    return out


def _load(source) -> Replay:
    if isinstance(source, Replay):
        return source
    if isinstance(source, (str, os.PathLike)):
        return Replay.read(source)
    return Replay.parse(list(source))


def build_game_graph(source: Union[Replay, str, os.PathLike, Sequence[str]]) -> GameGraph:
    """Graph of a replay (object, file path or JSON lines).

    Segments are maximal runs of states with the same owner. Every event
    becomes one edge; ``src`` is the segment owning the ball at the step the
    event happened and ``dst`` the segment owning it right after. Parse
    errors carry the offending line number.
    """
    replay = _load(source)
    owners = replay.owner
    segments = possession_segments(owners)
    seg_at: List[Optional[int]] = [None] * len(owners)
    for i, seg in enumerate(segments):
        for t in range(seg.start, seg.end):
            seg_at[t] = i
    edges = []
    for ev in replay.events:
        t = ev.step - replay.start_step
        src = seg_at[t] if 0 <= t < len(seg_at) else None
        dst = seg_at[t + 1] if 0 <= t + 1 < len(seg_at) else None
        edges.append(Edge(ev, src, dst))
    graph = GameGraph(segments, edges, len(owners))
    graph.team_counts, graph.player_counts = graph.recount()
    return graph


def event_counts(events: Sequence[Event]) -> collections.Counter:
    return collections.Counter(e.kind.value for e in events)


__all__ = ["Edge", "GameGraph", "PossessionSegment", "build_game_graph", "event_counts",
           "possession_segments"]

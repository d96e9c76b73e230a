"""Min-max normalised skill tables for radar plots."""
from __future__ import annotations

import csv
import io
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .stats import TEAM_METRICS, MatchStats

RADAR_METRICS = TEAM_METRICS + ("movement",)


def skill_profile(matches: Sequence[Tuple[MatchStats, int]]) -> Dict[str, float]:
    """Mean team metrics of one policy over ``(stats, team)`` pairs."""
    if not matches:
        raise ValueError("no matches")
    rows = [m.teams[team].as_dict() for m, team in matches]
    return {k: float(np.mean([r[k] for r in rows])) for k in RADAR_METRICS}


def radar_table(profiles: Mapping[str, Mapping[str, float]], metrics: Sequence[str] = RADAR_METRICS):
    """Rescale every metric to [0, 1] across policies; constant metrics become 0.5."""
    names = list(profiles)
    if len(names) < 2:
        raise ValueError("need at least two policies")
    raw = np.array([[float(profiles[n][m]) for m in metrics] for n in names])
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    span = hi - lo
    scaled = np.where(span > 0, (raw - lo) / np.where(span > 0, span, 1.0), 0.5)
    return names, list(metrics), scaled


def radar_csv(names: Sequence[str], metrics: Sequence[str], table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", *metrics])
    for n, row in zip(names, np.asarray(table)):
        w.writerow([n, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def read_radar_csv(text: str) -> Tuple[List[str], List[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    metrics = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    table = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(names), len(metrics))
    return names, metrics, table


def radar_export(profiles: Mapping[str, Mapping[str, float]], metrics: Sequence[str] = RADAR_METRICS) -> str:
    return radar_csv(*radar_table(profiles, metrics))

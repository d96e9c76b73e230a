"""Team shape metrics: weighted centroid, hull area, separateness, length/width."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env.replay import Replay

CENTROID_EPS = 0.05
WIDTH_FLOOR = 1e-6


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, without repeated or collinear points."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.float64).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def polygon_area(poly) -> float:
    """Shoelace area (absolute value)."""
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def hull_area(points) -> float:
    return polygon_area(convex_hull(points))


def weighted_centroid(points, ball, eps: float = CENTROID_EPS) -> np.ndarray:
    """Players closer to the ball weigh more: w = 1 / (eps + distance)."""
    p = np.asarray(points, dtype=np.float64)
    w = 1.0 / (eps + np.linalg.norm(p - np.asarray(ball, dtype=np.float64), axis=-1))
    return (w[:, None] * p).sum(axis=0) / w.sum()


def separateness(ours, theirs) -> float:
    """Sum over our players of the distance to their closest opponent."""
    a = np.asarray(ours, dtype=np.float64)
    b = np.asarray(theirs, dtype=np.float64)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(d.min(axis=1).sum())


def length_per_width(points, floor: float = WIDTH_FLOOR) -> float:
    p = np.asarray(points, dtype=np.float64)
    length = float(p[:, 0].max() - p[:, 0].min())
    width = float(p[:, 1].max() - p[:, 1].min())
    return length / max(width, floor)


@dataclass
class FormationMetrics:
    centroid: np.ndarray          # (S, 2, 2)
    eps: np.ndarray               # (S, 2)
    separateness: np.ndarray      # (S, 2)
    length_per_width: np.ndarray  # (S, 2)

    def means(self) -> dict:
        return {
            "centroid": self.centroid.mean(axis=0).tolist(),
            "eps": self.eps.mean(axis=0).tolist(),
            "separateness": self.separateness.mean(axis=0).tolist(),
            "length_per_width": self.length_per_width.mean(axis=0).tolist(),
        }


def formation_metrics(replay: Replay) -> FormationMetrics:
    """Per-state metrics for both teams computed over field players (keepers excluded)."""
    S = replay.num_states
    cen = np.zeros((S, 2, 2))
    eps = np.zeros((S, 2))
    sep = np.zeros((S, 2))
    lpw = np.zeros((S, 2))
    for t in range(S):
        for team in (0, 1):
            ours = replay.pos[t, team, 1:]
            theirs = replay.pos[t, 1 - team, 1:]
            cen[t, team] = weighted_centroid(ours, replay.ball_pos[t])
            eps[t, team] = hull_area(ours)
            sep[t, team] = separateness(ours, theirs)
            lpw[t, team] = length_per_width(ours)
    return FormationMetrics(cen, eps, sep, lpw)

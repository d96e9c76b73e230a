"""Meta-game solvers and rating rules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import ContractError

NASH_TOL = 1e-3
NASH_MAX_ITERS = 1_000_000
ELO_INIT = 1200.0
ELO_K = 32.0


@dataclass
class NashResult:
    strategy: np.ndarray
    exploitability: float
    iterations: int
    converged: bool


def exploitability(matrix, strategy) -> float:
    """Gain of the best pure reply against ``strategy`` (0 at equilibrium).

    ``matrix[i][j]`` is the payoff of strategy i against j, so the best
    reply earns ``max_i (M sigma)_i`` while sigma against itself earns 0.
    """
    M = np.asarray(matrix, dtype=np.float64)
    s = np.asarray(strategy, dtype=np.float64)
    return float(np.max(M @ s) - s @ M @ s)


def check_antisymmetric(matrix, atol: float = 1e-12) -> np.ndarray:
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ContractError(f"payoff matrix must be square and non-empty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ContractError("payoff matrix has non-finite entries")
    if not np.allclose(M, -M.T, rtol=0.0, atol=atol):
        raise ContractError("payoff matrix is not antisymmetric")
    return M


def nash_solve(matrix, tol: float = NASH_TOL, max_iters: int = NASH_MAX_ITERS) -> NashResult:
    """Symmetric equilibrium of an antisymmetric zero-sum game by fictitious play.

    Play starts from the best reply to the uniform mixture; each step adds
    one count to the current best reply (lowest index on ties) until the
    empirical mixture is ``tol``-exploitable. Consecutive steps that keep
    the same best reply are advanced in closed form: the number of steps
    until another strategy overtakes it, and the first step within that run
    at which the tolerance is met, both follow from linear inequalities in
    the run length. The result is the same mixture plain step-by-step play
    would produce.
    """
    M = check_antisymmetric(matrix)
    n = M.shape[0]
    uniform = np.full(n, 1.0 / n)
    if exploitability(M, uniform) <= tol:
        return NashResult(uniform, exploitability(M, uniform), 0, True)

    counts = np.zeros(n)
    counts[int(np.argmax(M @ uniform))] = 1.0
    t = 1
    best = (exploitability(M, counts / t), counts.copy(), t)
    while True:
        u = M @ counts
        e_now = float(u.max()) / t
        if e_now < best[0]:
            best = (e_now, counts.copy(), t)
        if e_now <= tol:
            return NashResult(counts / t, e_now, t, True)
        if t >= max_iters:
            e, c, tt = best
            refined = _support_refine(M, c / tt, tol)
            if refined is not None:
                return NashResult(refined, exploitability(M, refined), t, True)
            return NashResult(c / tt, e, t, False)
        b = int(np.argmax(u))
        col = M[:, b]
        ub = u[b]
        run = math.inf
        for i in range(n):
            if i == b or col[i] <= 0.0:
                continue
            gap = (ub - u[i]) / col[i]
            k = math.ceil(gap) if i < b else math.floor(gap) + 1
            run = min(run, max(k, 1))
        run = min(run, max_iters - t)
        # smallest k in [1, run] with max_i (u_i + k col_i) <= tol (t + k)
        lo, hi = 1.0, float(run)
        for i in range(n):
            slope = col[i] - tol
            rhs = tol * t - u[i]
            if slope > 0:
                hi = min(hi, rhs / slope)
            elif slope < 0:
                lo = max(lo, rhs / slope)
            elif rhs < 0:
                hi = -math.inf
        k = run
        if lo <= hi:
            k0 = max(1, int(math.ceil(lo)))
            # guard the closed form against rounding by checking neighbours
            for cand in (k0 - 1, k0, k0 + 1):
                if 1 <= cand <= run and float(np.max(u + cand * col)) <= tol * (t + cand):
                    k = cand
                    break
        counts[b] += k
        t += int(k)


def _support_refine(M: np.ndarray, sigma: np.ndarray, tol: float):
    """Exact equilibrium on a support guessed from a fictitious-play mixture.

    On its support S a symmetric equilibrium of an antisymmetric game
    satisfies M_SS x = 0 with x summing to one. Candidate supports are the
    strategies above a few weight thresholds and the near-best replies to
    ``sigma``; the first candidate whose solution is a distribution with
    exploitability <= tol is returned, otherwise None.
    """
    n = len(sigma)
    u = M @ sigma
    gap = float(u.max())
    candidates = []
    for thr in (1e-2, 3e-3, 1e-3, 3e-4):
        candidates.append(tuple(np.flatnonzero(sigma > thr)))
    for scale in (2.0, 5.0, 20.0):
        candidates.append(tuple(np.flatnonzero(u >= gap - scale * max(gap, tol))))
    if n <= 12:
        # exhaustive fallback, heaviest supports first
        order = np.argsort(-sigma, kind="stable")
        for size in range(1, n + 1):
            candidates.append(tuple(sorted(order[:size])))
        for mask in range(1, 2 ** n):
            candidates.append(tuple(i for i in range(n) if mask >> i & 1))
    seen = set()
    for support in candidates:
        if not support or support in seen:
            continue
        seen.add(support)
        S = list(support)
        A = np.vstack([M[np.ix_(S, S)], np.ones((1, len(S)))])
        rhs = np.zeros(len(S) + 1)
        rhs[-1] = 1.0
        x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        if np.any(x < -1e-12):
            continue
        full = np.zeros(n)
        full[S] = np.clip(x, 0.0, None)
        full /= full.sum()
        if exploitability(M, full) <= tol:
            return full
    return None


def elo_expected(r_a: float, r_b: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def elo_update(ratings: Dict[str, float], results: Iterable[Tuple[str, str, float]], k: float = ELO_K):
    """Apply ``(a, b, score_of_a)`` results in order; score 1 win, 0.5 draw, 0 loss."""
    out = dict(ratings)
    for a, b, score in results:
        ra = out.setdefault(a, ELO_INIT)
        rb = out.setdefault(b, ELO_INIT)
        ea = elo_expected(ra, rb)
        delta = k * (float(score) - ea)
        out[a] = ra + delta
        out[b] = rb - delta
    return out


def pfsp_weights(win_rates: Sequence[float], p: float = 2.0) -> np.ndarray:
    """Opponent distribution favouring opponents the learner does not beat: w ~ (1 - x)^p."""
    x = np.asarray(win_rates, dtype=np.float64)
    if x.size == 0:
        raise ContractError("no candidates")
    if np.any(x < 0) or np.any(x > 1):
        raise ContractError("win rates must lie in [0, 1]")
    w = np.power(1.0 - x, p)
    total = w.sum()
    if total <= 0:
        return np.full(x.size, 1.0 / x.size)
    return w / total

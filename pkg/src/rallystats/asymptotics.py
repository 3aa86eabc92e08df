"""Limiting laws of the rally count in the no-server model as p -> 0 or 1.

Conditioning on the winner, four of the eight (system, winner, direction)
cases sit above almost-sure events and degenerate to a point mass.  The
other four sit above vanishing events and stay non-degenerate: under
side-out scoring a win by the receiver side against p -> 1 becomes uniform
on {n+1, ..., 2n}, and under rally-point scoring a win against the trend
puts mass proportional to binom(n+k-1, k) on n+k (all trajectories to a
given score being equally likely in the limit).

These laws double as convergence oracles for the exact engines.  Limit
PMFs are built from exact rationals, so they sum to one exactly.
"""

from __future__ import annotations

import enum
from fractions import Fraction
from math import comb

import numpy as np

from .core import GameConfig, Player, RallyProbs, ScoringSystem
from .duration import DurationPMF, Moments, duration_pmf_winner
from .rallypoint import duration_pmf_winner as rp_duration_pmf_winner


class Direction(enum.Enum):
    P_TO_0 = "p->0"
    P_TO_1 = "p->1"


def _degenerate(point: int) -> tuple[Moments, DurationPMF]:
    pmf = DurationPMF(offset=point, masses=np.array([1.0]), truncation_bound=0.0)
    return Moments(float(point), 0.0), pmf


def _uniform_tail(n: int) -> tuple[Moments, DurationPMF]:
    masses = np.full(n, float(Fraction(1, n)))
    pmf = DurationPMF(offset=n + 1, masses=masses, truncation_bound=0.0)
    # Discrete uniform on n consecutive integers: variance (n^2 - 1)/12.
    # (Not (n-1)^2/12, which is sometimes quoted but does not match this law.)
    mean = float(Fraction(3 * n + 1, 2))
    var = float(Fraction(n * n - 1, 12))
    return Moments(mean, var), pmf


def _trajectory_law(n: int) -> tuple[Moments, DurationPMF]:
    weights = [comb(n + k - 1, k) for k in range(n)]
    total = sum(weights)
    masses = np.array([float(Fraction(w, total)) for w in weights])
    pmf = DurationPMF(offset=n, masses=masses, truncation_bound=0.0)
    mean = float(Fraction(2 * n * n, n + 1))
    var = float(Fraction(2 * n * n * (n - 1), (n + 1) ** 2 * (n + 2)))
    return Moments(mean, var), pmf


def _limit_case(system: ScoringSystem, winner: Player, direction: Direction, n: int):
    if n < 1:
        raise ValueError("n must be >= 1")
    if system is ScoringSystem.SIDE_OUT:
        if winner is Player.A:
            return _degenerate(n)  # only all-A trajectories survive, either direction
        if direction is Direction.P_TO_0:
            return _degenerate(n + 1)  # B must first regain the serve
        return _uniform_tail(n)
    if (winner is Player.A) == (direction is Direction.P_TO_1):
        return _degenerate(n)
    return _trajectory_law(n)


def limit_moments(system: ScoringSystem, winner: Player, direction: Direction, n: int) -> Moments:
    """Limiting (mean, variance) of D conditional on the winner of an
    A-game, as p tends to 0 or 1 in the no-server model."""
    return _limit_case(system, winner, direction, n)[0]


def limit_pmf(system: ScoringSystem, winner: Player, direction: Direction, n: int) -> DurationPMF:
    """Exact limiting PMF for the same conditioning (rational weights)."""
    return _limit_case(system, winner, direction, n)[1]


def tv_distance(a: DurationPMF, b: DurationPMF) -> float:
    """Total-variation distance, counting any truncated mass as misplaced."""
    start = min(a.offset, b.offset)
    stop = max(a.offset + len(a.masses), b.offset + len(b.masses))
    pa = np.zeros(stop - start)
    pb = np.zeros(stop - start)
    pa[a.offset - start : a.offset - start + len(a.masses)] = a.masses
    pb[b.offset - start : b.offset - start + len(b.masses)] = b.masses
    return 0.5 * float(np.abs(pa - pb).sum()) + 0.5 * (
        max(1.0 - a.total_mass, 0.0) + max(1.0 - b.total_mass, 0.0)
    )


def convergence_check(
    system: ScoringSystem,
    winner: Player,
    direction: Direction,
    n: int,
    p_sequence,
    epsilon: float = 1e-12,
) -> np.ndarray:
    """Total-variation distance between the exact conditional law of D in
    an A-game at each p and the limiting law.

    The distances should decrease along a sequence approaching the limit;
    a ConditioningError propagates if the conditioning event underflows at
    an extreme p, so callers choose the p range accordingly.
    """
    target = limit_pmf(system, winner, direction, n)
    out = []
    for p in p_sequence:
        probs = RallyProbs.no_server(p)
        if system is ScoringSystem.SIDE_OUT:
            config = GameConfig(n=n, system=system)
            pmf = duration_pmf_winner(probs, config, winner, epsilon=epsilon, server=Player.A)
        else:
            config = GameConfig(n=n, system=system)
            pmf = rp_duration_pmf_winner(probs, config, winner, server=Player.A)
        out.append(tv_distance(pmf, target))
    return np.array(out)

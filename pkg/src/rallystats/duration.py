"""Distribution of the rally count D of a side-out game.

Conditional on a final tally and the first server, D decomposes into the
points scored, the serve transitions of the interruptions, and the
exchanges.  The exchange count is negative-binomial, the interruption
count R has a finite combinatorial weight law, and both enter D through
twice their value.  This gives closed-form conditional moments (depending
on the rally probabilities only through the exchange probability q) and an
exact PMF as the convolution of the two laws, with a certified truncation
bound for the infinite exchange series.

Tie-break-extended games are out of scope here; compose tie probabilities
from `sideout` at a higher level if needed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConditioningError,
    ConfigError,
    DomainError,
    GameConfig,
    GammaBounds,
    Player,
    RallyProbs,
    ScoringSystem,
    binom,
    validate,
)
from .sideout import _score_prob_a_game

_TINY = 1e-300  # below this a conditioning event counts as underflowed


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class DurationPMF:
    """Dense PMF of a rally count, starting at `offset`.

    masses[i] is the probability of duration offset + i; structurally
    impossible durations (wrong parity) carry an exact 0.  The probability
    mass discarded when truncating an infinite series is bounded above by
    `truncation_bound`.
    """

    offset: int
    masses: np.ndarray
    truncation_bound: float

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def support(self) -> np.ndarray:
        return self.offset + np.nonzero(self.masses > 0.0)[0]

    def prob(self, d: int) -> float:
        i = d - self.offset
        if i < 0 or i >= len(self.masses):
            return 0.0
        return float(self.masses[i])

    def moments(self) -> Moments:
        total = self.total_mass
        if total <= _TINY:
            raise ConditioningError("PMF carries no mass")
        d = self.offset + np.arange(len(self.masses))
        mean = float(np.dot(d, self.masses)) / total
        second = float(np.dot(d * d, self.masses)) / total
        return Moments(mean, max(second - mean * mean, 0.0))

    @property
    def mean(self) -> float:
        return self.moments().mean

    @property
    def variance(self) -> float:
        return self.moments().variance


class QuantileMode(enum.Enum):
    STANDARD = "standard"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class InterruptionWeights:
    """Law of the interruption count R given a tally and last scorer.

    `pair_shift[i]` is the number of extra rally *pairs* contributed by
    rs[i] interruptions (r pairs when the first server scores last, r - 1
    when the receiver side does, the final transition being single).
    """

    rs: np.ndarray
    weights: np.ndarray
    pair_shift: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.rs, self.weights))

    def variance(self) -> float:
        m = self.mean()
        return max(float(np.dot(self.rs * self.rs, self.weights)) - m * m, 0.0)


def interruption_weights(alpha: int, beta: int, last_scorer: Player, q: float) -> InterruptionWeights:
    """Normalized weights of the interruption count for an A-game tally.

    The minimal power of q is factored out before normalizing, so the
    weights are also defined at q = 0, where they become the q -> 0 limit
    (all mass on the fewest feasible interruptions).
    """
    if not (0.0 <= q < 1.0):
        raise DomainError(f"q={q} outside [0, 1)")
    g = GammaBounds.for_score(alpha, beta)
    if last_scorer is Player.A:
        if alpha < 1:
            raise ConfigError("last scorer A requires alpha >= 1")
        rs = np.arange(g.gamma0, g.gamma1 + 1)
        raw = np.array(
            [binom(alpha, r) * binom(beta - 1, r - 1) * q ** (r - g.gamma0) for r in rs]
        )
        shift = rs
    else:
        if beta < 1:
            raise ConfigError("last scorer B requires beta >= 1")
        rs = np.arange(1, g.gamma2 + 2)
        raw = np.array(
            [binom(alpha, r - 1) * binom(beta - 1, r - 1) * q ** (r - 1) for r in rs]
        )
        shift = rs - 1
    total = raw.sum()
    if total <= 0.0:
        raise ConditioningError("interruption weights degenerate")
    return InterruptionWeights(rs, raw / total, shift)


def mgf_conditional(alpha: int, beta: int, last_scorer: Player, q: float, t: float) -> float:
    """Moment generating function of D given the tally, the last scorer
    and first server A, evaluated at t.  Finite only while q*e^(2t) < 1.
    """
    if not (0.0 <= q < 1.0):
        raise DomainError(f"q={q} outside [0, 1)")
    qe = q * math.exp(2.0 * t)
    if qe >= 1.0:
        raise DomainError(f"MGF diverges: q*e^(2t) = {qe} >= 1")
    w = interruption_weights(alpha, beta, last_scorer, q)
    delta = 1 if last_scorer is Player.B else 0
    base = ((1.0 - q) * math.exp(t) / (1.0 - qe)) ** (alpha + beta)
    return base * float(np.dot(w.weights, np.exp(t * (2.0 * w.rs - delta))))


def expected_duration_conditional(alpha: int, beta: int, last_scorer: Player, q: float) -> float:
    """Exact conditional expectation of D: the shutout value
    (alpha+beta)(1+q)/(1-q) plus twice the mean interruption count (minus
    one when the receiver side scores last)."""
    w = interruption_weights(alpha, beta, last_scorer, q)
    delta = 1 if last_scorer is Player.B else 0
    return (alpha + beta) * (1.0 + q) / (1.0 - q) - delta + 2.0 * w.mean()


def variance_duration_conditional(alpha: int, beta: int, last_scorer: Player, q: float) -> float:
    """Exact conditional variance of D: 4(alpha+beta)q/(1-q)^2 plus four
    times the interruption-count variance."""
    w = interruption_weights(alpha, beta, last_scorer, q)
    return 4.0 * (alpha + beta) * q / (1.0 - q) ** 2 + 4.0 * w.variance()


def _exchange_pmf(m0: int, q: float, epsilon: float) -> tuple[np.ndarray, float]:
    """Negative-binomial law of the exchange count for m0 scored points:
    P[J = l] = binom(m0+l-1, l) q^l (1-q)^m0.

    Truncated at the first index past the peak where the geometric tail
    bound drops below epsilon times the accumulated mass; the bound uses
    the current term ratio, which decreases towards q, so it is certified.
    """
    if epsilon <= 0.0:
        raise DomainError("epsilon must be > 0")
    if q == 0.0:
        return np.array([1.0]), 0.0
    base = (1.0 - q) ** m0
    if base <= 0.0:
        raise DomainError(f"q={q} too close to 1: exchange series underflows for {m0} points")
    vals = [base]
    cum = base
    term = base
    l = 0
    while True:
        ratio = q * (m0 + l) / (l + 1)
        nxt = term * ratio
        if ratio < 1.0:
            tail = nxt / (1.0 - ratio)
            if tail <= epsilon * cum:
                bound = min(tail, max(1.0 - cum, 0.0))
                return np.array(vals), bound
        l += 1
        term = nxt
        vals.append(term)
        cum += term
        if l > 10_000_000:
            raise DomainError("exchange series failed to converge")


def _a_game_coords(
    alpha: int, beta: int, last_scorer: Player, server: Player, probs: RallyProbs
) -> tuple[int, int, Player, RallyProbs]:
    if server is Player.A:
        return alpha, beta, last_scorer, probs
    return beta, alpha, last_scorer.other, probs.swapped()


def duration_pmf_conditional(
    alpha: int,
    beta: int,
    last_scorer: Player,
    probs: RallyProbs,
    epsilon: float = 1e-12,
    server: Player = Player.A,
) -> DurationPMF:
    """Exact PMF of D given the tally, the last scorer and the first
    server, as the convolution of the interruption and exchange laws.

    Mass sits only on alpha+beta+2j when the first server scores last and
    on alpha+beta+2j+1 otherwise (the server-effect parity).
    """
    validate(probs)
    a, b, c, pr = _a_game_coords(alpha, beta, last_scorer, server, probs)
    q = pr.q
    w = interruption_weights(a, b, c, q)
    nb, bound = _exchange_pmf(a + b, q, epsilon)
    delta = 1 if c is Player.B else 0
    shift_max = int(w.pair_shift.max())
    pairs = np.zeros(len(nb) + shift_max)
    for weight, shift in zip(w.weights, w.pair_shift):
        pairs[shift : shift + len(nb)] += weight * nb
    masses = np.zeros(2 * len(pairs) - 1)
    masses[::2] = pairs
    return DurationPMF(offset=a + b + delta, masses=masses, truncation_bound=bound)


def _mix_pmfs(parts: list[tuple[float, DurationPMF]]) -> DurationPMF:
    parts = [(wt, pmf) for wt, pmf in parts if wt > 0.0]
    if not parts:
        raise ConditioningError("mixture carries no mass")
    start = min(pmf.offset for _, pmf in parts)
    stop = max(pmf.offset + len(pmf.masses) for _, pmf in parts)
    masses = np.zeros(stop - start)
    bound = 0.0
    for wt, pmf in parts:
        i = pmf.offset - start
        masses[i : i + len(pmf.masses)] += wt * pmf.masses
        bound += wt * pmf.truncation_bound
    return DurationPMF(offset=start, masses=masses, truncation_bound=bound)


def _require_sideout(config: GameConfig) -> None:
    if config.system is not ScoringSystem.SIDE_OUT:
        raise ConfigError("this operation is for side-out scoring; see rallypoint module")
    if config.tiebreak is not None:
        raise ConfigError("durations of tie-break-extended games are not supported")


def _score_weights(pr: RallyProbs, n: int) -> tuple[np.ndarray, np.ndarray]:
    """A-game score probabilities (serving side wins on (n,k); receiving
    side wins on (k,n)) for role-swapped reuse."""
    win = np.array([_score_prob_a_game(n, k, Player.A, pr) for k in range(n)])
    loss = np.array([_score_prob_a_game(k, n, Player.B, pr) for k in range(n)])
    return win, loss


def _mix_moments(parts: list[tuple[float, Moments]]) -> Moments:
    total = sum(wt for wt, _ in parts)
    if total <= _TINY:
        raise ConditioningError("conditioning event has vanished")
    mean = sum(wt * m.mean for wt, m in parts) / total
    second = sum(wt * (m.variance + m.mean**2) for wt, m in parts) / total
    return Moments(mean, max(second - mean * mean, 0.0))


@dataclass(frozen=True)
class DurationAggregates:
    """Moments of D aggregated over scores, winners and servers.

    Keys of `by_server_winner` are (first server, game winner); `by_winner`
    mixes the first server out with the posterior server weights given the
    winner, and `overall` is unconditional on everything.
    """

    by_server_winner: dict[tuple[Player, Player], Moments]
    by_server: dict[Player, Moments]
    by_winner: dict[Player, Moments]
    overall: Moments
    win_probs: dict[tuple[Player, Player], float]


def _aggregate_from_parts(
    score_moments,  # (server, winner) -> list of (weight, Moments) per score
    win_probs: dict[tuple[Player, Player], float],
    s_a: float,
) -> DurationAggregates:
    by_server_winner = {}
    for key, parts in score_moments.items():
        by_server_winner[key] = _mix_moments(parts)
    by_server = {}
    for server in Player:
        by_server[server] = _mix_moments(
            [
                (win_probs[(server, winner)], by_server_winner[(server, winner)])
                for winner in Player
            ]
        )
    s = {Player.A: s_a, Player.B: 1.0 - s_a}
    by_winner = {}
    for winner in Player:
        by_winner[winner] = _mix_moments(
            [
                (s[server] * win_probs[(server, winner)], by_server_winner[(server, winner)])
                for server in Player
                if s[server] > 0.0
            ]
        )
    overall = _mix_moments([(s[server], by_server[server]) for server in Player if s[server] > 0.0])
    return DurationAggregates(by_server_winner, by_server, by_winner, overall, win_probs)


def aggregate_moments(probs: RallyProbs, config: GameConfig) -> DurationAggregates:
    """Expectation and variance of D for every conditioning level: per
    (server, winner), per server, per winner, and overall."""
    validate(probs, config)
    _require_sideout(config)
    n = config.n
    score_moments = {}
    win_probs = {}
    for server in Player:
        pr = probs if server is Player.A else probs.swapped()
        q = pr.q
        win_w, loss_w = _score_weights(pr, n)
        win_parts = []
        loss_parts = []
        for k in range(n):
            win_parts.append(
                (
                    float(win_w[k]),
                    Moments(
                        expected_duration_conditional(n, k, Player.A, q),
                        variance_duration_conditional(n, k, Player.A, q),
                    ),
                )
            )
            loss_parts.append(
                (
                    float(loss_w[k]),
                    Moments(
                        expected_duration_conditional(k, n, Player.B, q),
                        variance_duration_conditional(k, n, Player.B, q),
                    ),
                )
            )
        # role A in pr-coordinates is the actual first server
        score_moments[(server, server)] = win_parts
        score_moments[(server, server.other)] = loss_parts
        win_probs[(server, server)] = float(win_w.sum())
        win_probs[(server, server.other)] = float(loss_w.sum())
    return _aggregate_from_parts(score_moments, win_probs, config.s_a)


def _server_duration_parts(
    probs: RallyProbs, config: GameConfig, server: Player, epsilon: float
) -> dict[Player, list[tuple[float, DurationPMF]]]:
    """(weight, PMF) pairs per winner for a fixed first server."""
    n = config.n
    pr = probs if server is Player.A else probs.swapped()
    win_w, loss_w = _score_weights(pr, n)
    parts = {server: [], server.other: []}
    for k in range(n):
        parts[server].append(
            (float(win_w[k]), duration_pmf_conditional(n, k, Player.A, pr, epsilon))
        )
        parts[server.other].append(
            (float(loss_w[k]), duration_pmf_conditional(k, n, Player.B, pr, epsilon))
        )
    return parts


def duration_pmf_winner(
    probs: RallyProbs,
    config: GameConfig,
    winner: Player,
    epsilon: float = 1e-12,
    server: Player | None = None,
) -> DurationPMF:
    """PMF of D conditional on the game winner; `server=None` mixes the
    first server out with the posterior weights given that winner."""
    validate(probs, config)
    _require_sideout(config)
    servers = [server] if server is not None else [Player.A, Player.B]
    s = {Player.A: config.s_a, Player.B: config.s_b} if server is None else {server: 1.0}
    parts = []
    for sv in servers:
        if s[sv] == 0.0:
            continue
        for wt, pmf in _server_duration_parts(probs, config, sv, epsilon)[winner]:
            parts.append((s[sv] * wt, pmf))
    total = sum(wt for wt, _ in parts)
    if total <= _TINY:
        raise ConditioningError(f"P[{winner} wins] underflowed")
    return _mix_pmfs([(wt / total, pmf) for wt, pmf in parts])


def duration_pmf_unconditional(
    probs: RallyProbs,
    config: GameConfig,
    epsilon: float = 1e-12,
    server: Player | None = None,
) -> DurationPMF:
    """PMF of D mixed over all terminal scores and winners; `server=None`
    additionally mixes the first server with weights (s_a, s_b)."""
    validate(probs, config)
    _require_sideout(config)
    servers = [server] if server is not None else [Player.A, Player.B]
    s = {Player.A: config.s_a, Player.B: config.s_b} if server is None else {server: 1.0}
    parts = []
    for sv in servers:
        if s[sv] == 0.0:
            continue
        per_winner = _server_duration_parts(probs, config, sv, epsilon)
        for winner in Player:
            parts.extend((s[sv] * wt, pmf) for wt, pmf in per_winner[winner])
    return _mix_pmfs(parts)


def quantile(pmf: DurationPMF, level: float, mode: QuantileMode = QuantileMode.STANDARD) -> float:
    """Quantile of a duration PMF.

    STANDARD returns the smallest support point whose CDF reaches `level`.
    INTERPOLATED inverts the piecewise-linear curve through the support
    points anchored at mid-jump CDF values (cumulative mass below a point
    plus half its own mass), clamped at the extremes; between two
    consecutive same-parity support points d and d+2 this interpolates
    linearly across the window, avoiding the empty parity class in
    between.
    """
    if not (0.0 < level < 1.0):
        raise DomainError(f"quantile level {level} outside (0, 1)")
    idx = np.nonzero(pmf.masses > 0.0)[0]
    if len(idx) == 0:
        raise ConditioningError("PMF carries no mass")
    support = pmf.offset + idx
    w = pmf.masses[idx]
    cdf = np.cumsum(w)
    if level > cdf[-1]:
        raise DomainError(
            f"level {level} unreachable: computed mass {cdf[-1]:.17g} "
            f"(truncation bound {pmf.truncation_bound:.3g})"
        )
    if mode is QuantileMode.STANDARD:
        return float(support[np.searchsorted(cdf, level)])
    mid = cdf - 0.5 * w
    if level <= mid[0]:
        return float(support[0])
    if level >= mid[-1]:
        return float(support[-1])
    i = int(np.searchsorted(mid, level)) - 1
    frac = (level - mid[i]) / (mid[i + 1] - mid[i])
    return float(support[i] + frac * (support[i + 1] - support[i]))

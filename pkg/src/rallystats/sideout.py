"""Exact score probabilities for games under side-out scoring.

A game is described rally by rally through interruption counts r and
exchange counts j.  Summing the elementary event probabilities over r and
j gives closed forms for the probability of every final tally, from which
game-winning probabilities, tie-break extensions and first-server mixing
follow.

All quantities are stated for A-games (A serves first); B-game quantities
are obtained by swapping the player roles, which keeps a single code path
and makes the symmetry testable for free.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ConfigError,
    GameConfig,
    GammaBounds,
    Player,
    RallyProbs,
    TerminalScore,
    binom,
    validate,
)


def prob_score_r_j(
    alpha: int,
    beta: int,
    last_scorer: Player,
    r: int,
    j: int,
    probs: RallyProbs,
) -> float:
    """Probability, in an A-game, of final tally (alpha, beta) with
    `last_scorer` taking the last point through exactly r A-interruptions
    and j exchanges.

    Returns 0 for any (r, j) outside the feasible ranges.
    """
    validate(probs)
    if j < 0:
        return 0.0
    g = GammaBounds.for_score(alpha, beta)
    p_a, p_b, q_a, q = probs.p_a, probs.p_b, probs.q_a, probs.q
    if last_scorer is Player.A:
        if alpha < 1:
            raise ConfigError("last scorer A requires alpha >= 1")
        if not (g.gamma0 <= r <= g.gamma1):
            return 0.0
        return (
            binom(alpha + beta + j - 1, j)
            * binom(alpha, r)
            * binom(beta - 1, r - 1)
            * p_a**alpha
            * p_b**beta
            * q ** (r + j)
        )
    if beta < 1:
        raise ConfigError("last scorer B requires beta >= 1")
    if not (1 <= r <= g.gamma2 + 1):
        return 0.0
    return (
        binom(alpha + beta + j - 1, j)
        * binom(alpha, r - 1)
        * binom(beta - 1, r - 1)
        * p_a**alpha
        * p_b**beta
        * q_a
        * q ** (r + j - 1)
    )


def _score_prob_a_game(alpha: int, beta: int, last_scorer: Player, probs: RallyProbs) -> float:
    # Per-point factors p_a/(1-q) and p_b/(1-q) never exceed 1, so the
    # products stay in range even for extreme parameters (e.g. p ~ 1e-2,
    # n = 15 gives probabilities near 1e-31 without underflow).
    p_a, p_b, q_a, q = probs.p_a, probs.p_b, probs.q_a, probs.q
    g = GammaBounds.for_score(alpha, beta)
    x = p_a / (1.0 - q)
    y = p_b / (1.0 - q)
    if last_scorer is Player.A:
        if alpha < 1:
            raise ConfigError("last scorer A requires alpha >= 1")
        s = 0.0
        for r in range(g.gamma0, g.gamma1 + 1):
            s += binom(alpha, r) * binom(beta - 1, r - 1) * q**r
        return x**alpha * y**beta * s
    if beta < 1:
        raise ConfigError("last scorer B requires beta >= 1")
    s = 0.0
    for r in range(1, g.gamma2 + 2):
        s += binom(alpha, r - 1) * binom(beta - 1, r - 1) * q ** (r - 1)
    return x**alpha * y**beta * q_a * s


def score_prob(
    alpha: int,
    beta: int,
    last_scorer: Player,
    server: Player,
    probs: RallyProbs,
) -> float:
    """Exact probability that a game with the given first server passes
    through final tally (alpha, beta) with `last_scorer` scoring last."""
    validate(probs)
    if server is Player.A:
        return _score_prob_a_game(alpha, beta, last_scorer, probs)
    # B-game: exchange the player roles (p_a <-> p_b, alpha <-> beta).
    return _score_prob_a_game(beta, alpha, last_scorer.other, probs.swapped())


@dataclass(frozen=True)
class ScoreDistribution:
    """Probabilities of every terminal score of a complete game.

    `server` is the first server, or None for an s_a-weighted mixture.
    """

    config: GameConfig
    server: Player | None
    entries: dict[TerminalScore, float]

    def win_prob(self, player: Player) -> float:
        return sum(p for score, p in self.entries.items() if score.winner is player)

    @property
    def total_mass(self) -> float:
        return sum(self.entries.values())


def _terminal_scores(config: GameConfig) -> list[TerminalScore]:
    n = config.n
    if config.tiebreak is None:
        out = [TerminalScore(n, k, Player.A) for k in range(n)]
        out += [TerminalScore(k, n, Player.B) for k in range(n)]
        return out
    ell = config.tiebreak
    out = [TerminalScore(n, k, Player.A) for k in range(n - 1)]
    out += [TerminalScore(k, n, Player.B) for k in range(n - 1)]
    out += [TerminalScore(n + ell - 1, n + k - 1, Player.A) for k in range(ell)]
    out += [TerminalScore(n + k - 1, n + ell - 1, Player.B) for k in range(ell)]
    return out


def tiebreak_score_prob(
    k: int,
    winner: Player,
    server: Player,
    probs: RallyProbs,
    config: GameConfig,
) -> float:
    """Probability of the extended score reached when the game, tied at
    n-1 all, is set to l further points and the winner finishes l to k.

    The extension stage is served first by whoever scored the tying point,
    which is what two-stage conditioning on the tie event encodes.
    """
    validate(probs, config)
    ell = config.tiebreak
    if ell is None:
        raise ConfigError("config has no tie-break extension")
    if config.n < 2:
        raise ConfigError("tie-break requires n >= 2")
    if not (0 <= k <= ell - 1):
        raise ConfigError(f"tie-break loser score k={k} outside 0..{ell - 1}")
    n = config.n
    tie_a = score_prob(n - 1, n - 1, Player.A, server, probs)
    tie_b = score_prob(n - 1, n - 1, Player.B, server, probs)
    if winner is Player.A:
        return tie_a * score_prob(ell, k, Player.A, Player.A, probs) + tie_b * score_prob(
            ell, k, Player.A, Player.B, probs
        )
    return tie_a * score_prob(k, ell, Player.B, Player.A, probs) + tie_b * score_prob(
        k, ell, Player.B, Player.B, probs
    )


def _single_server_distribution(probs: RallyProbs, config: GameConfig, server: Player) -> ScoreDistribution:
    entries: dict[TerminalScore, float] = {}
    n = config.n
    for score in _terminal_scores(config):
        if config.tiebreak is not None and max(score.alpha, score.beta) > n:
            k = score.points(score.winner.other) - (n - 1)
            entries[score] = tiebreak_score_prob(k, score.winner, server, probs, config)
        else:
            entries[score] = score_prob(score.alpha, score.beta, score.last_scorer, server, probs)
    return ScoreDistribution(config, server, entries)


def score_distribution(
    probs: RallyProbs,
    config: GameConfig,
    server: Player | None = None,
) -> ScoreDistribution:
    """Full distribution over terminal scores; `server=None` mixes A- and
    B-games with weights (s_a, s_b) from the config."""
    validate(probs, config)
    if server is not None:
        return _single_server_distribution(probs, config, server)
    dist_a = _single_server_distribution(probs, config, Player.A)
    dist_b = _single_server_distribution(probs, config, Player.B)
    entries = {
        score: config.s_a * dist_a.entries[score] + config.s_b * dist_b.entries[score]
        for score in dist_a.entries
    }
    return ScoreDistribution(config, None, entries)


def game_win_prob(winner: Player, server: Player, probs: RallyProbs, config: GameConfig) -> float:
    """Probability that `winner` takes a game whose first server is `server`."""
    validate(probs, config)
    n = config.n
    if config.tiebreak is not None:
        return _single_server_distribution(probs, config, server).win_prob(winner)
    if winner is Player.A:
        return sum(score_prob(n, k, Player.A, server, probs) for k in range(n))
    return sum(score_prob(k, n, Player.B, server, probs) for k in range(n))


def mixed_server_probs(probs: RallyProbs, config: GameConfig) -> tuple[ScoreDistribution, dict[Player, float]]:
    """Score distribution and win probabilities unconditional on the first
    server, weighted by (s_a, s_b)."""
    dist = score_distribution(probs, config, server=None)
    wins = {Player.A: dist.win_prob(Player.A), Player.B: dist.win_prob(Player.B)}
    return dist, wins

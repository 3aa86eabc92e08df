"""Rally-level Monte Carlo engine for both scoring systems.

Streams are split with numpy's SeedSequence, so a (master seed, stream
index) pair pins every uniform deviate: runs are reproducible bit for bit
and sweep points own independent streams regardless of evaluation order.
Game batches are simulated with vectorized state arrays; the scalar
`simulate_game` follows the same transition rules rally by rally and can
retain the full trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GameConfig, Player, RallyProbs, ScoringSystem, TerminalScore, validate


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream index; equal specs reproduce equal runs."""

    master: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.master, self.stream]))

    def child(self, index: int) -> "SeedSpec":
        # distinct stream per (stream, index) pair for index < 1_000_003;
        # count enforced so sweep streams cannot collide with each other
        if not (0 <= index < 1_000_003):
            raise ValueError("child index out of range")
        return SeedSpec(self.master, self.stream * 1_000_003 + index + 1)


@dataclass(frozen=True)
class SimResult:
    score: TerminalScore
    winner: Player
    duration: int
    trajectory: tuple[tuple[Player, Player], ...] | None = None


@dataclass(frozen=True)
class GameSample:
    """Vectorized outcome arrays of a batch of independent games."""

    first_server_a: np.ndarray  # bool
    alpha: np.ndarray  # points by A
    beta: np.ndarray  # points by B
    winner_a: np.ndarray  # bool
    duration: np.ndarray  # rally counts


@dataclass(frozen=True)
class EstimatorReport:
    """Win-probability and duration estimators of a replication batch.

    Conditional entries are None when no game produced the conditioning
    winner.  Variances use the 1/count normalization."""

    p_hat: dict[Player, float]
    e_hat: float
    v_hat: float
    e_hat_winner: dict[Player, float | None]
    v_hat_winner: dict[Player, float | None]
    replications: int
    wins: dict[Player, int]


def simulate_game(
    probs: RallyProbs,
    config: GameConfig,
    seed: SeedSpec,
    keep_trajectory: bool = False,
) -> SimResult:
    """Play a single game rally by rally.

    Side-out: the server scores on a won rally, otherwise the serve
    transfers without a point.  Rally-point: the rally winner scores and
    serves next.  With a tie-break configured, reaching n-1 all raises the
    target by the extension length.
    """
    validate(probs, config)
    rng = seed.generator()
    n = config.n
    sideout = config.system is ScoringSystem.SIDE_OUT
    server = Player.A if rng.random() < config.s_a else Player.B
    score = {Player.A: 0, Player.B: 0}
    target = n
    extended = False
    trajectory = [] if keep_trajectory else None
    duration = 0
    while True:
        p_serve = probs.p_a if server is Player.A else probs.p_b
        server_won = rng.random() < p_serve
        rally_winner = server if server_won else server.other
        duration += 1
        if trajectory is not None:
            trajectory.append((server, rally_winner))
        if sideout:
            if server_won:
                score[server] += 1
        else:
            score[rally_winner] += 1
        server = rally_winner
        if (
            config.tiebreak is not None
            and not extended
            and score[Player.A] == n - 1
            and score[Player.B] == n - 1
        ):
            target = n - 1 + config.tiebreak
            extended = True
        if score[Player.A] >= target or score[Player.B] >= target:
            winner = Player.A if score[Player.A] >= target else Player.B
            final = TerminalScore(score[Player.A], score[Player.B], winner)
            return SimResult(
                final, winner, duration, tuple(trajectory) if trajectory is not None else None
            )


def _batch_games(
    probs: RallyProbs,
    config: GameConfig,
    count: int,
    rng: np.random.Generator,
    first_server_a: np.ndarray | None = None,
) -> GameSample:
    p_a, p_b = probs.p_a, probs.p_b
    n = config.n
    sideout = config.system is ScoringSystem.SIDE_OUT
    if first_server_a is None:
        first_server_a = rng.random(count) < config.s_a
    server_a = first_server_a.copy()
    score_a = np.zeros(count, dtype=np.int64)
    score_b = np.zeros(count, dtype=np.int64)
    duration = np.zeros(count, dtype=np.int64)
    target = np.full(count, n, dtype=np.int64)
    active = np.ones(count, dtype=bool)
    while True:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        sa = server_a[idx]
        server_won = rng.random(idx.size) < np.where(sa, p_a, p_b)
        duration[idx] += 1
        if sideout:
            a_scores = sa & server_won
            b_scores = ~sa & server_won
        else:
            a_scores = sa == server_won
            b_scores = ~a_scores
        score_a[idx[a_scores]] += 1
        score_b[idx[b_scores]] += 1
        server_a[idx] = np.where(server_won, sa, ~sa)
        if config.tiebreak is not None:
            tie = idx[(score_a[idx] == n - 1) & (score_b[idx] == n - 1) & (target[idx] == n)]
            target[tie] = n - 1 + config.tiebreak
        finished = idx[(score_a[idx] >= target[idx]) | (score_b[idx] >= target[idx])]
        active[finished] = False
    return GameSample(
        first_server_a=first_server_a,
        alpha=score_a,
        beta=score_b,
        winner_a=score_a >= target,
        duration=duration,
    )


def sample_games(probs: RallyProbs, config: GameConfig, replications: int, seed: SeedSpec) -> GameSample:
    """Simulate `replications` independent games as outcome arrays."""
    validate(probs, config)
    if replications < 1:
        raise ValueError("replications must be >= 1")
    return _batch_games(probs, config, replications, seed.generator())


def _report_from_sample(sample: GameSample) -> EstimatorReport:
    d = sample.duration.astype(float)
    total = len(d)
    wins = {Player.A: int(sample.winner_a.sum())}
    wins[Player.B] = total - wins[Player.A]
    e_hat = float(d.mean())
    v_hat = float(((d - e_hat) ** 2).mean())
    e_w: dict[Player, float | None] = {}
    v_w: dict[Player, float | None] = {}
    for player, mask in ((Player.A, sample.winner_a), (Player.B, ~sample.winner_a)):
        if wins[player] == 0:
            e_w[player] = None
            v_w[player] = None
        else:
            dc = d[mask]
            m = float(dc.mean())
            e_w[player] = m
            v_w[player] = float(((dc - m) ** 2).mean())
    return EstimatorReport(
        p_hat={p: wins[p] / total for p in Player},
        e_hat=e_hat,
        v_hat=v_hat,
        e_hat_winner=e_w,
        v_hat_winner=v_w,
        replications=total,
        wins=wins,
    )


def run_experiment(probs: RallyProbs, config: GameConfig, replications: int, seed: SeedSpec) -> EstimatorReport:
    """Simulate a batch of games and report the standard estimators."""
    return _report_from_sample(sample_games(probs, config, replications, seed))


def sweep(
    probs_grid,
    config: GameConfig,
    replications: int,
    seed: SeedSpec,
) -> list[EstimatorReport]:
    """One experiment per grid point, each on its own child stream, so the
    result is independent of evaluation order."""
    return [
        run_experiment(probs, config, replications, seed.child(i))
        for i, probs in enumerate(probs_grid)
    ]


def no_server_grid(step: float = 0.0005) -> list[RallyProbs]:
    """No-server parameter grid {step, 2*step, ..., 1 - step}."""
    count = round(1.0 / step) - 1
    return [RallyProbs.no_server(i * step) for i in range(1, count + 1)]


@dataclass(frozen=True)
class MatchSample:
    """Outcome arrays of a batch of independent matches."""

    winner_a: np.ndarray  # bool
    total_rallies: np.ndarray
    games_played: np.ndarray


def sample_matches(
    probs: RallyProbs,
    game_config: GameConfig,
    match_config,
    replications: int,
    seed: SeedSpec,
) -> MatchSample:
    """Simulate first-to-M-games matches under the configured rule for the
    first server of each game (`match_config` from the matchlevel module)."""
    from .matchlevel import ServerRule

    validate(probs, game_config)
    rng = seed.generator()
    count = replications
    wins_a = np.zeros(count, dtype=np.int64)
    wins_b = np.zeros(count, dtype=np.int64)
    rallies = np.zeros(count, dtype=np.int64)
    games = np.zeros(count, dtype=np.int64)
    server_a = rng.random(count) < game_config.s_a
    m = match_config.games_to_win
    active = np.ones(count, dtype=bool)
    while True:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        batch = _batch_games(probs, game_config, idx.size, rng, first_server_a=server_a[idx])
        rallies[idx] += batch.duration
        games[idx] += 1
        wins_a[idx[batch.winner_a]] += 1
        wins_b[idx[~batch.winner_a]] += 1
        if match_config.server_rule is ServerRule.WINNER_SERVES_NEXT:
            server_a[idx] = batch.winner_a
        elif match_config.server_rule is ServerRule.ALTERNATE:
            server_a[idx] = ~server_a[idx]
        else:  # COIN_FLIP_EACH
            server_a[idx] = rng.random(idx.size) < game_config.s_a
        active[idx] = (wins_a[idx] < m) & (wins_b[idx] < m)
    return MatchSample(winner_a=wins_a >= m, total_rallies=rallies, games_played=games)

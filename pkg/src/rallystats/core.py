"""Shared domain types, parameter validation and binomial utilities.

Everything here is an immutable value or a pure function, so the whole
package is safe to use from concurrent callers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class DomainError(ValueError):
    """A parameter violates a model invariant (probability range, q=1, ...)."""


class ConfigError(ValueError):
    """A game/match configuration is inconsistent with the requested operation."""


class ConditioningError(ArithmeticError):
    """The conditioning event has numerically vanished (probability underflow)."""


class InfeasibleData(ValueError):
    """An observed record has probability zero for every parameter value."""


class NonConvergence(RuntimeError):
    """The optimizer exhausted its evaluation budget without converging."""


class Player(enum.Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Player":
        return Player.B if self is Player.A else Player.A

    def __str__(self) -> str:
        return self.value


class ScoringSystem(enum.Enum):
    SIDE_OUT = "sideout"
    RALLY_POINT = "rallypoint"


@dataclass(frozen=True)
class RallyProbs:
    """Rally-winning probabilities on serve for players A and B.

    The complements and the exchange probability are derived on access,
    never stored, so they cannot go stale.
    """

    p_a: float
    p_b: float

    def __post_init__(self):
        if not (0.0 <= self.p_a <= 1.0):
            raise DomainError(f"p_a={self.p_a} outside [0, 1]")
        if not (0.0 <= self.p_b <= 1.0):
            raise DomainError(f"p_b={self.p_b} outside [0, 1]")

    @property
    def q_a(self) -> float:
        return 1.0 - self.p_a

    @property
    def q_b(self) -> float:
        return 1.0 - self.p_b

    @property
    def q(self) -> float:
        """Probability of an exchange: serve gained and immediately lost."""
        return self.q_a * self.q_b

    def swapped(self) -> "RallyProbs":
        """Same game seen from the other player's side."""
        return RallyProbs(self.p_b, self.p_a)

    @staticmethod
    def no_server(p: float) -> "RallyProbs":
        """Sub-model in which serving confers no advantage: p_a = p = 1 - p_b."""
        return RallyProbs(p, 1.0 - p)


@dataclass(frozen=True)
class GameConfig:
    """Target score, scoring system, optional tie-break extension and
    distribution of the first server (s_a = P[first server is A])."""

    n: int
    system: ScoringSystem = ScoringSystem.SIDE_OUT
    tiebreak: int | None = None
    s_a: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"target score n={self.n} must be >= 1")
        if self.tiebreak is not None:
            if self.tiebreak < 2:
                raise ConfigError(f"tie-break extension l={self.tiebreak} must be >= 2")
            if self.system is not ScoringSystem.SIDE_OUT:
                raise ConfigError("tie-break extension only applies to side-out scoring")
        if not (0.0 <= self.s_a <= 1.0):
            raise ConfigError(f"s_a={self.s_a} outside [0, 1]")

    @property
    def s_b(self) -> float:
        return 1.0 - self.s_a


@dataclass(frozen=True)
class TerminalScore:
    """Final point tally (alpha for A, beta for B) plus who scored last."""

    alpha: int
    beta: int
    last_scorer: Player

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise DomainError(f"negative score ({self.alpha}, {self.beta})")
        if self.last_scorer is Player.A and self.alpha < 1:
            raise DomainError("last scorer A requires alpha >= 1")
        if self.last_scorer is Player.B and self.beta < 1:
            raise DomainError("last scorer B requires beta >= 1")

    @property
    def winner(self) -> Player:
        """In a completed game, the player scoring the last point wins it."""
        return self.last_scorer

    def points(self, player: Player) -> int:
        return self.alpha if player is Player.A else self.beta


@dataclass(frozen=True)
class GammaBounds:
    """Interruption-count ranges attached to a final tally (alpha, beta):
    gamma0..gamma1 when A scores last, 1..gamma2+1 when B does."""

    gamma0: int
    gamma1: int
    gamma2: int

    @staticmethod
    def for_score(alpha: int, beta: int) -> "GammaBounds":
        return GammaBounds(min(beta, 1), min(alpha, beta), min(alpha, beta - 1))


def binom(m: int, k: int) -> float:
    """Binomial coefficient in double precision, with binom(-1, -1) := 1.

    Outside that special case the coefficient is zero whenever k < 0 or
    k > m.  Computed by a multiplicative recurrence (relative error a few
    ulp per factor), which is ample for the coefficient sizes this package
    meets (n <= 50).
    """
    if m == -1 and k == -1:
        return 1.0
    if k < 0 or k > m:
        return 0.0
    k = min(k, m - k)
    out = 1.0
    for i in range(k):
        out = out * (m - i) / (i + 1)
    return out


def validate(probs: RallyProbs, config: GameConfig | None = None, *, exact: bool = True) -> None:
    """Check every invariant the engines rely on; raise DomainError otherwise.

    `exact=True` additionally requires q < 1 (with q = 1 no rally ever
    scores and the game never terminates); this is also what the
    simulation engine needs.
    """
    if not (0.0 <= probs.p_a <= 1.0):
        raise DomainError(f"p_a={probs.p_a} outside [0, 1]")
    if not (0.0 <= probs.p_b <= 1.0):
        raise DomainError(f"p_b={probs.p_b} outside [0, 1]")
    if exact and probs.q >= 1.0:
        raise DomainError("q=1, game never terminates (p_a=0 and p_b=0)")
    if config is not None and config.n < 1:
        raise ConfigError(f"target score n={config.n} must be >= 1")

"""Discrete ad-exchange reward distributions.

A distribution is stored by its support values ``r_1 < ... < r_d`` and the
cumulative masses ``q_1 < ... < q_d = 1`` (``q_u`` is the probability that
the reward is at most ``r_u``; ``q_0 = 0`` is implicit).  Cumulative storage
matches the parameterization used by every downstream formula and avoids
re-summation drift.

Instances are immutable after construction and safe to share across threads;
random streams are always passed in by the caller, never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, MalformedDistribution, RewardExceedsPenalty

# Construction-time renormalization window for the final cumulative mass.
_MASS_TOL = 1e-12


@dataclass(frozen=True)
class RewardDistribution:
    """Discrete distribution of the highest exchange bid.

    Attributes
    ----------
    support : tuple of float
        Strictly increasing reward values, all >= 0.
    cum_mass : tuple of float
        Strictly increasing cumulative masses in (0, 1], final entry
        exactly 1 (renormalized at construction when within 1e-12).
    """

    support: Tuple[float, ...]
    cum_mass: Tuple[float, ...]

    def __post_init__(self):
        support = tuple(float(v) for v in self.support)
        cum = tuple(float(v) for v in self.cum_mass)
        if len(support) == 0:
            raise MalformedDistribution("support must be non-empty")
        if len(support) != len(cum):
            raise MalformedDistribution(
                f"support and cum_mass lengths differ: {len(support)} vs {len(cum)}"
            )
        if any(v < 0.0 for v in support):
            raise MalformedDistribution("rewards must be non-negative")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise MalformedDistribution("support must be strictly increasing")
        if any(b <= a for a, b in zip(cum, cum[1:])):
            raise MalformedDistribution("cum_mass must be strictly increasing")
        if cum[0] <= 0.0:
            raise MalformedDistribution("masses must be positive")
        if abs(cum[-1] - 1.0) > _MASS_TOL:
            raise MalformedDistribution(
                f"final cumulative mass is {cum[-1]!r}, expected 1"
            )
        if cum[-1] != 1.0:
            total = cum[-1]
            cum = tuple(v / total for v in cum[:-1]) + (1.0,)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "cum_mass", cum)

    # ---- constructors ----

    @classmethod
    def point_mass(cls, reward: float) -> "RewardDistribution":
        return cls((reward,), (1.0,))

    @classmethod
    def binary(cls, q: float, r: float) -> "RewardDistribution":
        """Reward 0 with probability q, reward r with probability 1 - q."""
        if not 0.0 < q < 1.0:
            raise MalformedDistribution(f"q must be in (0, 1), got {q}")
        if r <= 0.0:
            raise MalformedDistribution(f"binary high reward must be > 0, got {r}")
        return cls((0.0, float(r)), (float(q), 1.0))

    @classmethod
    def from_masses(cls, support: Sequence[float], masses: Sequence[float]) -> "RewardDistribution":
        """Build from point masses instead of cumulative masses."""
        cum = np.cumsum(np.asarray(masses, dtype=float))
        return cls(tuple(float(v) for v in support), tuple(cum))

    # ---- basic queries ----

    @property
    def d(self) -> int:
        return len(self.support)

    def point_masses(self) -> Tuple[float, ...]:
        prev = 0.0
        out = []
        for q in self.cum_mass:
            out.append(q - prev)
            prev = q
        return tuple(out)

    def mean(self) -> float:
        return float(sum(m * r for m, r in zip(self.point_masses(), self.support)))

    # ---- JSON wire format ----

    def to_json(self) -> str:
        return json.dumps({"support": list(self.support), "cum_mass": list(self.cum_mass)})

    @classmethod
    def from_json(cls, text: str) -> "RewardDistribution":
        obj = json.loads(text)
        try:
            return cls(tuple(obj["support"]), tuple(obj["cum_mass"]))
        except (KeyError, TypeError) as exc:
            raise MalformedDistribution(f"bad distribution JSON: {exc}") from exc


def validate(dist: RewardDistribution, penalty: float) -> RewardDistribution:
    """Gate for every downstream operation.

    Re-checks the structural invariants and requires the top reward not to
    exceed the penalty.  A top reward above the penalty means those queries
    should always be sold on the exchange; we refuse rather than silently
    truncating, so the caller can pre-filter.
    """
    # Reconstructing re-runs the structural checks.
    checked = RewardDistribution(dist.support, dist.cum_mass)
    if checked.support[-1] > penalty:
        raise RewardExceedsPenalty(
            f"top reward {checked.support[-1]} exceeds penalty {penalty}"
        )
    return checked


def normalize(
    dist: RewardDistribution, penalty: float, f: float, total_demand: float
) -> Tuple[RewardDistribution, float, float]:
    """Shift rewards and penalty down by the lowest support value.

    Every allocation's objective in the original units exceeds the shifted
    objective by exactly ``(f - 1) * total_demand * r_1``: each of the
    ``f*N`` queries loses ``r_1`` of exchange value while each of the at
    most ``N`` undelivered impressions costs ``r_1`` less, and the delivered
    counts cancel.  Returns ``(shifted distribution, shifted penalty,
    offset)`` with the offset to add back when reporting absolute reward.
    """
    checked = validate(dist, penalty)
    r1 = checked.support[0]
    if r1 == 0.0:
        return checked, float(penalty), 0.0
    shifted = RewardDistribution(
        tuple(v - r1 for v in checked.support), checked.cum_mass
    )
    offset = (f - 1.0) * total_demand * r1
    return shifted, float(penalty) - r1, offset


def cond_mean_below(dist: RewardDistribution, u: int) -> float:
    """Mean reward conditioned on the reward being at most ``r_u`` (1-based u)."""
    if not 1 <= u <= dist.d:
        raise DomainError(f"index u={u} out of range 1..{dist.d}")
    masses = dist.point_masses()
    acc = sum(masses[i] * dist.support[i] for i in range(u))
    return float(acc / dist.cum_mass[u - 1])


def top_quantile_mean(dist: RewardDistribution, p: float) -> float:
    """Mean of the top ``p`` probability mass, splitting the boundary atom.

    ``p = 0`` returns 0 by convention; ``p = 1`` returns the full mean.  The
    atom straddling the ``1 - p`` quantile contributes only the part of its
    mass that lies inside the top ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must be in [0, 1], got {p}")
    if p == 0.0:
        return 0.0
    remaining = p
    acc = 0.0
    masses = dist.point_masses()
    for i in range(dist.d - 1, -1, -1):
        take = min(remaining, masses[i])
        acc += take * dist.support[i]
        remaining -= take
        if remaining <= 0.0:
            break
    return float(acc / p)


def sample(dist: RewardDistribution, rng: np.random.Generator) -> float:
    """Draw one reward; identical generator state gives identical draws."""
    return float(sample_array(dist, rng, 1)[0])


def sample_array(
    dist: RewardDistribution, rng: np.random.Generator, size: int
) -> np.ndarray:
    u = rng.random(size)
    idx = np.searchsorted(np.asarray(dist.cum_mass), u, side="right")
    return np.asarray(dist.support, dtype=float)[idx]

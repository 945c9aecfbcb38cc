"""Threshold computation for the online serving policy.

The serving engine needs ``d`` satisfaction-ratio thresholds
``s_1 <= ... <= s_d = 1``; while the minimum satisfaction ratio lies in
``[s_{u-1}, s_u)`` the exchange must beat the reserve ``r_{d+1-u}`` to win
the query.  This module computes those thresholds:

* closed form for binary distributions,
* the adversarial impression profile ``beta*`` and the resulting
  objective, both at finite quantile resolution ``t`` (``lb_discrete``)
  and in its exact large-``t`` closed form (``ub_continuous``),
* a bucketed dynamic program over the threshold grid for general
  distributions, plus an exhaustive grid oracle used in tests.

All operations are pure functions of immutable inputs and safe to run in
parallel across parameter grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dist import RewardDistribution, cond_mean_below, normalize, validate
from .errors import DomainError, InfeasibleDecay, TooManyThresholds

DEFAULT_GRID = 1.0 / 200.0

# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPolicy:
    """Sorted thresholds over the satisfaction ratio plus the reserve lookup.

    ``reserve(u)`` returns the ``(d+1-u)``-th support value: the lower the
    least-satisfied contract sits, the higher the exchange bid must be.
    """

    thresholds: Tuple[float, ...]
    dist: RewardDistribution

    def __post_init__(self):
        thresholds = tuple(float(v) for v in self.thresholds)
        d = self.dist.d
        if len(thresholds) != d:
            raise DomainError(
                f"expected {d} thresholds for support size {d}, got {len(thresholds)}"
            )
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise DomainError("thresholds must be non-decreasing")
        if any(v < 0.0 or v > 1.0 for v in thresholds):
            raise DomainError("thresholds must lie in [0, 1]")
        if thresholds[-1] != 1.0:
            raise DomainError(f"final threshold must be exactly 1, got {thresholds[-1]}")
        object.__setattr__(self, "thresholds", thresholds)

    @property
    def d(self) -> int:
        return self.dist.d

    def reserve(self, u: int) -> float:
        """Reserve price while the minimum SR lies in segment ``u`` (1-based)."""
        if not 1 <= u <= self.d:
            raise DomainError(f"segment u={u} out of range 1..{self.d}")
        return self.dist.support[self.d - u]

    def with_distribution(self, dist: RewardDistribution) -> "ThresholdPolicy":
        """Rebind the same thresholds to another distribution (e.g. unshifted units)."""
        return ThresholdPolicy(self.thresholds, dist)


@dataclass(frozen=True, eq=False)
class AdversaryProfile:
    """Expected impression counts per 1/t satisfaction-ratio slice.

    ``beta[j-1]`` is the expected number of impressions allocated while the
    recipient's satisfaction ratio lay in slice ``j``; ``alpha`` is the
    implied per-slice finishing demand ``t * (beta_j - beta_{j+1})``.
    """

    t: int
    beta: np.ndarray

    def __post_init__(self):
        if self.t < 1:
            raise DomainError(f"t must be >= 1, got {self.t}")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.t,):
            raise DomainError(f"beta must have length t={self.t}")
        object.__setattr__(self, "beta", beta)

    @property
    def alpha(self) -> np.ndarray:
        return self.t * (self.beta - np.append(self.beta[1:], 0.0))


# ---------------------------------------------------------------------------
# closed form for binary support
# ---------------------------------------------------------------------------


def binary_threshold(f: float, q: float, r: float, c: float) -> float:
    """Optimal single threshold for the binary distribution (0 w.p. q, r w.p. 1-q).

    Returns ``max(0, 1 + f*q*ln(1 - r/c))``; never exceeds 1 since r < c.
    """
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must be in (0, 1), got {q}")
    if f < 1.0:
        raise DomainError(f"supply factor must be >= 1, got {f}")
    if not 0.0 <= r < c:
        raise DomainError(f"need 0 <= r < c, got r={r}, c={c}")
    return max(0.0, 1.0 + f * q * math.log(1.0 - r / c))


# ---------------------------------------------------------------------------
# quantile-grid machinery shared by the finite-t computations
# ---------------------------------------------------------------------------


def _require_normalized(dist: RewardDistribution, c: float) -> RewardDistribution:
    checked = validate(dist, c)
    if checked.support[0] != 0.0:
        raise DomainError(
            f"distribution must be normalized (lowest reward 0), got {checked.support[0]}"
        )
    return checked


def _check_threshold_vector(thresholds: Sequence[float], d: int) -> Tuple[float, ...]:
    ts = tuple(float(v) for v in thresholds)
    if len(ts) != d:
        raise DomainError(f"expected {d} thresholds, got {len(ts)}")
    if any(b < a for a, b in zip(ts, ts[1:])) or any(v < 0 or v > 1 for v in ts):
        raise DomainError(f"thresholds must be non-decreasing in [0, 1]: {ts}")
    if ts[-1] != 1.0:
        raise DomainError(f"final threshold must be 1, got {ts[-1]}")
    return ts


def segment_bounds(thresholds: Sequence[float], t: int) -> List[int]:
    """Integer slice boundaries ``b_0 = 0 <= b_1 <= ... <= b_d = t``.

    Slice index ``j`` (1-based) belongs to segment ``u`` when
    ``b_{u-1} < j <= b_u``; empty segments are allowed after rounding.
    """
    bounds = [0]
    for s in thresholds:
        b = int(math.floor(s * t + 0.5))
        bounds.append(min(t, max(bounds[-1], b)))
    bounds[-1] = t
    return bounds


def index_weights(dist: RewardDistribution, thresholds: Sequence[float], t: int) -> np.ndarray:
    """Per-slice LP weights ``w_j = 1/q_{d+1-u(j)}`` as a length-t array."""
    d = dist.d
    bounds = segment_bounds(thresholds, t)
    lengths = np.diff(bounds)
    weights = np.array([1.0 / dist.cum_mass[d - u] for u in range(1, d + 1)])
    return np.repeat(weights, lengths)


def beta_closed_form(policy: ThresholdPolicy, f: float, N: float, t: int) -> AdversaryProfile:
    """Piecewise-geometric optimal LP solution.

    Within segment ``u`` the profile decays by ``1 - (1/q_{d+1-u})/(t*f)``
    per slice, chained across segments, starting from ``beta_1 = N/t``.
    """
    if t < 1:
        raise DomainError(f"t must be >= 1, got {t}")
    w = index_weights(policy.dist, policy.thresholds, t)
    factors = 1.0 - w / (t * f)
    if np.any(factors < 0.0):
        bad = float(np.max(w[factors < 0.0]))
        raise InfeasibleDecay(
            f"decay weight {bad} exceeds t*f = {t * f}; increase t"
        )
    beta = (N / t) * np.cumprod(np.concatenate(([1.0], factors[:-1])))
    return AdversaryProfile(t=t, beta=beta)


def lb_discrete(policy: ThresholdPolicy, f: float, c: float, N: float, t: int) -> float:
    """Objective of the serving policy against the worst case, at resolution t.

    ``-cN + sum_u fN (q_u - q_{u-1}) r_u
    + sum_u sum_{j in segment u} beta*_j (c - E[r | r <= r_{d+1-u}])``
    """
    dist = _require_normalized(policy.dist, c)
    beta = beta_closed_form(policy, f, N, t).beta
    d = dist.d
    bounds = segment_bounds(policy.thresholds, t)
    lengths = np.diff(bounds)
    coefs = np.array([c - cond_mean_below(dist, d + 1 - u) for u in range(1, d + 1)])
    per_index = np.repeat(coefs, lengths)
    masses = np.asarray(dist.point_masses())
    base = -c * N + f * N * float(masses @ np.asarray(dist.support))
    return float(base + beta @ per_index)


# ---------------------------------------------------------------------------
# exact large-t objective
# ---------------------------------------------------------------------------


def _ub_value(
    support: Sequence[float],
    cum_mass: Sequence[float],
    thresholds: Sequence[float],
    f: float,
    c: float,
    N: float,
) -> float:
    # Raw-array core, shared with the refinement-invariance property test.
    support = np.asarray(support, dtype=float)
    cum = np.asarray(cum_mass, dtype=float)
    ts = np.asarray(thresholds, dtype=float)
    d = len(support)
    masses = np.diff(np.concatenate(([0.0], cum)))
    diffs = np.diff(np.concatenate(([0.0], ts)))
    # X_k = sum_{j<=k} (s_j - s_{j-1}) / (f q_{d+1-j})
    inv_q = 1.0 / cum[::-1]
    X = np.cumsum(diffs * inv_q) / f
    # segment v term pairs with atom d+1-v
    depletion = 1.0 - np.exp(-X)
    coefs = (masses * (c - support))[::-1]
    base = -c * N + f * N * float(masses @ support)
    return float(base + f * N * float(depletion @ coefs))


def ub_continuous(
    thresholds: Sequence[float],
    dist: RewardDistribution,
    f: float,
    c: float,
    N: float = 1.0,
) -> float:
    """Exact closed-form objective for the threshold vector as t grows large.

    ``-cN + sum_u fN (q_u - q_{u-1}) r_u + fN * sum_u
    (1 - exp(-sum_{j<=d+1-u} (s_j - s_{j-1})/(f q_{d+1-j}))) (q_u - q_{u-1}) (c - r_u)``
    """
    checked = _require_normalized(dist, c)
    ts = _check_threshold_vector(thresholds, checked.d)
    return _ub_value(checked.support, checked.cum_mass, ts, f, c, N)


# ---------------------------------------------------------------------------
# threshold optimization
# ---------------------------------------------------------------------------


def _grid_values(grid: float) -> np.ndarray:
    if not 0.0 < grid < 1.0:
        raise DomainError(f"grid step must be in (0, 1), got {grid}")
    n = int(math.floor(1.0 / grid + 1e-9))
    values = np.arange(n + 1) * grid
    if values[-1] < 1.0 - 1e-12:
        values = np.append(values, 1.0)
    values[-1] = 1.0
    return values


def optimize_thresholds_dp(
    dist: RewardDistribution,
    f: float,
    c: float,
    N: float = 1.0,
    grid: float = DEFAULT_GRID,
) -> ThresholdPolicy:
    """Bucketed dynamic program over the threshold grid.

    State after placing ``s_v`` is the pair (grid value of ``s_v``,
    accumulated depletion factor ``E_v = exp(-sum_{j<=v} (s_j-s_{j-1})/(f q_{d+1-j}))``),
    with ``E`` bucketed to multiples of ``grid/d`` (floor) to bound the
    table.  Each bucket keeps the best partial objective together with the
    exact ``E`` of that partial solution, so the reported objective is the
    true value of the returned thresholds; bucketing only limits which
    partial solutions survive, giving the standard O(cN * grid) gap to the
    grid optimum.  Ties break toward the lexicographically smallest vector.
    """
    checked = _require_normalized(dist, c)
    d = checked.d
    if d == 1:
        return ThresholdPolicy((1.0,), checked)
    ys = _grid_values(grid)
    ny = len(ys)
    inv_bucket = d / grid
    masses = checked.point_masses()

    # per (y index) candidate set: (values, exact Es, prefixes in lex order)
    states: List[Optional[Tuple[np.ndarray, np.ndarray, List[Tuple[float, ...]]]]] = [
        None
    ] * ny
    states[0] = (np.array([0.0]), np.array([1.0]), [()])

    for v in range(1, d + 1):
        q_seg = checked.cum_mass[d - v]
        coef = f * N * masses[d - v] * (c - checked.support[d - v])
        targets = range(ny) if v < d else [ny - 1]
        new_states: List[Optional[Tuple[np.ndarray, np.ndarray, List[Tuple[float, ...]]]]] = [
            None
        ] * ny
        for iy in targets:
            vals_parts, es_parts, src = [], [], []
            for iyp in range(iy + 1):
                prev = states[iyp]
                if prev is None:
                    continue
                pv, pe, _ = prev
                decay = math.exp(-(ys[iy] - ys[iyp]) / (f * q_seg))
                e_new = pe * decay
                vals_parts.append(pv + coef * (1.0 - e_new))
                es_parts.append(e_new)
                src.append((iyp, len(pv)))
            if not vals_parts:
                continue
            vals = np.concatenate(vals_parts)
            es = np.concatenate(es_parts)
            keys = np.floor(es * inv_bucket).astype(np.int64)
            order = np.arange(len(keys))
            srt = np.lexsort((order, -vals, keys))
            first = np.ones(len(srt), dtype=bool)
            first[1:] = keys[srt[1:]] != keys[srt[:-1]]
            keep = np.sort(srt[first])
            # resolve kept flat indices back to (source state, local index)
            offsets = np.cumsum([0] + [n for _, n in src])
            prefixes: List[Tuple[float, ...]] = []
            for k in keep:
                part = int(np.searchsorted(offsets, k, side="right") - 1)
                iyp = src[part][0]
                local = int(k - offsets[part])
                prefixes.append(states[iyp][2][local] + (float(ys[iy]),))
            new_states[iy] = (vals[keep], es[keep], prefixes)
        states = new_states

    final = states[ny - 1]
    assert final is not None
    vals, _, prefixes = final
    best = int(np.argmax(vals))
    thresholds = prefixes[best][:-1] + (1.0,)
    return ThresholdPolicy(thresholds, checked)


@lru_cache(maxsize=8)
def _monotone_combos(ny: int, k: int) -> np.ndarray:
    return np.array(
        list(combinations_with_replacement(range(ny), k)), dtype=np.int32
    ).reshape(-1, k)


def optimize_thresholds_grid(
    dist: RewardDistribution,
    f: float,
    c: float,
    N: float = 1.0,
    grid: float = DEFAULT_GRID,
) -> ThresholdPolicy:
    """Exhaustive enumeration of monotone grid threshold vectors (d <= 4).

    Exact grid optimum of ``ub_continuous``; test oracle for the DP.
    """
    checked = _require_normalized(dist, c)
    d = checked.d
    if d > 4:
        raise TooManyThresholds(f"exhaustive search limited to d <= 4, got {d}")
    if d == 1:
        return ThresholdPolicy((1.0,), checked)
    ys = _grid_values(grid)
    combos = _monotone_combos(len(ys), d - 1)
    masses = np.asarray(checked.point_masses())
    support = np.asarray(checked.support)
    inv_q = 1.0 / np.asarray(checked.cum_mass)[::-1]
    coefs = (masses * (c - support))[::-1]
    base = -c * N + f * N * float(masses @ support)

    best_val = -np.inf
    best_row: Optional[np.ndarray] = None
    chunk = 200_000
    for lo in range(0, len(combos), chunk):
        block = ys[combos[lo : lo + chunk]]
        S = np.concatenate([block, np.ones((len(block), 1))], axis=1)
        diffs = np.diff(np.concatenate([np.zeros((len(S), 1)), S], axis=1), axis=1)
        X = np.cumsum(diffs * inv_q, axis=1) / f
        obj = base + f * N * ((1.0 - np.exp(-X)) @ coefs)
        i = int(np.argmax(obj))
        if obj[i] > best_val:
            best_val = float(obj[i])
            best_row = S[i]
    assert best_row is not None
    thresholds = tuple(float(v) for v in best_row[:-1]) + (1.0,)
    return ThresholdPolicy(thresholds, checked)


def make_policy(
    dist: RewardDistribution,
    penalty: float,
    f: float,
    N: float = 1.0,
    grid: float = DEFAULT_GRID,
) -> Tuple[ThresholdPolicy, float, float]:
    """Validate, shift, optimize; return a serving policy in original units.

    Returns ``(policy bound to the original distribution, objective per the
    shifted units, offset to add back for absolute reward)``.  Binary
    distributions use the closed-form threshold; larger supports go through
    the dynamic program.
    """
    checked = validate(dist, penalty)
    shifted, c_shifted, offset = normalize(checked, penalty, f, N)
    if shifted.d == 2 and shifted.support[1] < c_shifted:
        q = shifted.cum_mass[0]
        r = shifted.support[1]
        s1 = binary_threshold(f, q, r, c_shifted)
        optimized = ThresholdPolicy((s1, 1.0), shifted)
    else:
        optimized = optimize_thresholds_dp(shifted, f, c_shifted, N, grid)
    objective = ub_continuous(optimized.thresholds, shifted, f, c_shifted, N)
    return optimized.with_distribution(checked), objective, offset

"""Online serving engine.

Implements the threshold rule per arriving query: find the eligible
advertiser with the lowest satisfaction ratio, look up the reserve for the
segment its ratio falls in, and send the query to the exchange only when
the reward beats the reserve.  Satisfaction-ratio comparisons are exact
rationals throughout; a float boundary misclassification would silently
change the algorithm.

One ``AllocationState`` belongs to one run and is mutated single-threaded;
runs are independent and parallelizable across seeds.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dist import RewardDistribution, sample_array
from .errors import MalformedBidSet
from .instances import Instance
from .policy import ThresholdPolicy


@dataclass
class AllocationState:
    """Per-advertiser delivery progress plus running exchange revenue."""

    demands: Tuple[int, ...]
    delivered: List[int]
    exchange_revenue: float = 0.0
    queries: int = 0

    @classmethod
    def fresh(cls, demands: Sequence[int]) -> "AllocationState":
        return cls(tuple(int(n) for n in demands), [0] * len(demands))

    def sr(self, a: int) -> Fraction:
        return Fraction(self.delivered[a], self.demands[a])


@dataclass(frozen=True)
class Decision:
    """Outcome of a single query: contract target or exchange, with context."""

    kind: str  # "contract" | "exchange"
    advertiser: Optional[int] = None
    exchange_id: Optional[int] = None
    reserve: Optional[float] = None
    min_sr_advertiser: Optional[int] = None


@dataclass(frozen=True)
class RunReport:
    """Realized reward decomposition for one completed run."""

    reward: float
    exchange_revenue: float
    penalty_paid: float
    offset: float
    demands: Tuple[int, ...]
    delivered: Tuple[int, ...]
    queries: int
    seed: Optional[int] = None

    @property
    def fill_rate(self) -> float:
        return sum(self.delivered) / sum(self.demands)


def _min_sr_advertiser(state: AllocationState, eligible: Iterable[int]) -> Optional[int]:
    # smallest satisfaction ratio, ties toward the smallest advertiser id;
    # cross-multiplied integer comparison keeps this exact
    best = None
    bk = bn = 0
    for a in sorted(eligible):
        k, n = state.delivered[a], state.demands[a]
        if best is None or k * bn < bk * n:
            best, bk, bn = a, k, n
    return best


def _segment(policy: ThresholdPolicy, k: int, n: int) -> int:
    # first u (1-based) with SR < s_u; exact Fraction-vs-float comparison
    sr = Fraction(k, n)
    for u, s in enumerate(policy.thresholds, start=1):
        if sr < s:
            return u
    raise AssertionError("SR must be < 1 here")


def serve_query(
    state: AllocationState,
    policy: ThresholdPolicy,
    eligible: Iterable[int],
    reward: float,
) -> Decision:
    """Route one query; mutates ``state``. Deterministic given its inputs."""
    state.queries += 1
    a = _min_sr_advertiser(state, eligible)
    if a is None or state.delivered[a] == state.demands[a]:
        state.exchange_revenue += reward
        return Decision(kind="exchange", min_sr_advertiser=a)
    u = _segment(policy, state.delivered[a], state.demands[a])
    reserve = policy.reserve(u)
    if reward <= reserve:
        state.delivered[a] += 1
        return Decision(kind="contract", advertiser=a, reserve=reserve, min_sr_advertiser=a)
    state.exchange_revenue += reward
    return Decision(kind="exchange", reserve=reserve, min_sr_advertiser=a)


def serve_query_multi_exchange(
    state: AllocationState,
    policy: ThresholdPolicy,
    eligible: Iterable[int],
    bids: Sequence[Tuple[int, bool, bool]],
) -> Decision:
    """Route one query given only per-exchange comparison outcomes.

    ``bids`` holds ``(exchange_id, clears_reserve, is_highest)`` triples; at
    most one bid may be flagged highest.  The same reserve is broadcast to
    every exchange, the highest bidder that clears it wins, otherwise the
    least-satisfied contract gets the impression.  Exchange revenue is not
    tracked here: the exact bid value is intentionally unknown.
    """
    highest = [b[0] for b in bids if b[2]]
    if len(highest) > 1:
        raise MalformedBidSet(f"multiple bids flagged highest: {highest}")
    state.queries += 1
    a = _min_sr_advertiser(state, eligible)
    if a is None or state.delivered[a] == state.demands[a]:
        winner = highest[0] if highest else None
        return Decision(kind="exchange", exchange_id=winner, min_sr_advertiser=a)
    u = _segment(policy, state.delivered[a], state.demands[a])
    reserve = policy.reserve(u)
    clearing = [b[0] for b in bids if b[1]]
    if clearing:
        winner = highest[0] if highest and highest[0] in clearing else min(clearing)
        return Decision(
            kind="exchange", exchange_id=winner, reserve=reserve, min_sr_advertiser=a
        )
    state.delivered[a] += 1
    return Decision(kind="contract", advertiser=a, reserve=reserve, min_sr_advertiser=a)


def finalize(
    state: AllocationState,
    penalty: float,
    offset: float = 0.0,
    seed: Optional[int] = None,
) -> RunReport:
    """Reward = exchange revenue - penalty * undelivered + offset."""
    undelivered = sum(n - k for n, k in zip(state.demands, state.delivered))
    penalty_paid = penalty * undelivered
    return RunReport(
        reward=state.exchange_revenue - penalty_paid + offset,
        exchange_revenue=state.exchange_revenue,
        penalty_paid=penalty_paid,
        offset=offset,
        demands=state.demands,
        delivered=tuple(state.delivered),
        queries=state.queries,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# whole-instance runs
# ---------------------------------------------------------------------------


def _cutoffs(policy: ThresholdPolicy, n: int) -> List[int]:
    # cut[u-1] = largest delivered count k with k/n strictly below s_u
    cuts = []
    for s in policy.thresholds:
        lim = Fraction(s) * n
        if lim.denominator == 1:
            cuts.append(int(lim) - 1)
        else:
            cuts.append(lim.numerator // lim.denominator)
    return cuts


def run_rewards(
    instance: Instance,
    policy: ThresholdPolicy,
    penalty: float,
    rewards: Sequence[float],
    offset: float = 0.0,
    seed: Optional[int] = None,
) -> RunReport:
    """Serve every query of ``instance`` against a fixed reward sequence.

    Equivalent to calling :func:`serve_query` per query (replay-identical),
    but grouped so the min-SR lookup is a heap instead of a scan.
    """
    rewards = np.asarray(rewards, dtype=float)
    if len(rewards) != instance.total_queries:
        raise ValueError(
            f"expected {instance.total_queries} rewards, got {len(rewards)}"
        )
    demands = instance.demands
    delivered = [0] * len(demands)
    equal_demands = len(set(demands)) == 1
    cuts_by_n: Dict[int, List[int]] = {n: _cutoffs(policy, n) for n in set(demands)}
    reserves = [policy.reserve(u) for u in range(1, policy.d + 1)]
    revenue = 0.0
    pos = 0
    for count, elig in instance.groups:
        block = rewards[pos : pos + count]
        pos += count
        if not elig:
            revenue += float(block.sum())
            continue
        if equal_demands:
            heap = [(delivered[a], a) for a in elig]
        else:
            heap = [(Fraction(delivered[a], demands[a]), a) for a in elig]
        heapq.heapify(heap)
        for qi, r in enumerate(block):
            # one heap entry per advertiser, refreshed on every delivery,
            # so the top is never stale
            _, a = heap[0]
            k = delivered[a]
            if k == demands[a]:
                # every eligible advertiser is saturated for good
                revenue += float(block[qi:].sum())
                break
            cuts = cuts_by_n[demands[a]]
            u = next(i for i, cut in enumerate(cuts) if k <= cut)  # 0-based segment
            if r <= reserves[u]:
                delivered[a] = k + 1
                nk = k + 1 if equal_demands else Fraction(k + 1, demands[a])
                heapq.heapreplace(heap, (nk, a))
            else:
                revenue += float(r)
    state = AllocationState(demands, delivered, revenue, int(len(rewards)))
    return finalize(state, penalty, offset=offset, seed=seed)


def run_instance(
    instance: Instance,
    policy: ThresholdPolicy,
    penalty: float,
    dist: RewardDistribution,
    seed: int,
    offset: float = 0.0,
) -> RunReport:
    """Sample a reward per query from ``dist`` under ``seed`` and run."""
    rng = np.random.default_rng(seed)
    rewards = sample_array(dist, rng, instance.total_queries)
    return run_rewards(instance, policy, penalty, rewards, offset=offset, seed=seed)

"""Offline optima: reference schedules, a release-window lower bound, and an
exact search.

``brute_force_opt`` binary-searches the objective ``F`` and decides each
probe with a depth-first search over joint zealous choices. A packet ``p``
must take its hop on router ``j`` no later than
``r(p) + F - (last_router(p) - j) - 1``; nodes are pruned when any router
fails a single-machine EDF test over the unit hops it still owes.
``exhaustive_opt`` is the independent oracle: no zealousness, no class
canonicalisation, no EDF bound.
"""
from __future__ import annotations

import heapq
import itertools
import re
import sys
from dataclasses import dataclass
from typing import Optional

from .core import Instance, InstanceError, Trace, flow_times
from .engine import simulate
from .policies import GREEDY, BlockPreference, block_policy

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class OptResult:
    value: int
    trace: Trace
    nodes_explored: int
    # False when a budget cut any probe short; value is then only an upper bound
    exact: bool


_AB = re.compile(r"^([AB])(\d+)$")
_STAGE = re.compile(r"^([SL])(\d+)$")


def canonical_prefs(instance: Instance) -> BlockPreference:
    """The block preferences realising the hand-built offline schedules.

    Recognised label schemas: ``A<i>``/``B<i>`` (with the two-router
    warm-up as its k=2 member), ``S``/``L``/``J`` for the two-router
    short/long construction, and ``S<j>``/``L<j>``/``J`` for the staged one.
    """
    labels = set(instance.blocks())
    if any(p.block is None for p in instance.packets):
        raise InstanceError("reference schedules need every packet block-labelled")
    if labels and all(_AB.match(s) for s in labels):
        order = {}
        for r in range(1, instance.k + 1):
            want = (f"B{r - 1}", f"B{r}", f"A{r}", f"A{r + 1}")
            order[r] = tuple(s for s in want if s in labels)
        return BlockPreference(order)
    if labels and labels <= {"S", "L", "J"}:
        if "J" in labels:
            return BlockPreference({1: ("L", "S"), 2: ("L", "J")})
        return BlockPreference({1: ("S", "L"), 2: ("L",)})
    if labels and all(_STAGE.match(s) or s == "J" for s in labels):
        stages = 1 + max(int(_STAGE.match(s).group(2)) for s in labels if s != "J")
        jam_router = None
        if "J" in labels:
            jam_router = next(p.origin for p in instance.packets if p.block == "J")
        return staged_prefs(stages, shorts_first_last=jam_router is None, jam_router=jam_router)
    if not labels:
        return BlockPreference({})
    raise InstanceError(f"no canonical preferences for labels {sorted(labels)}")


def staged_prefs(stages: int, shorts_first_last: bool, jam_router: Optional[int] = None) -> BlockPreference:
    """Stage j lives on router j+1: arriving longs, then its own longs, then shorts.

    With ``shorts_first_last`` the final stage keeps shorts ahead of its longs.
    """
    order: dict[int, tuple[str, ...]] = {}
    for j in range(stages):
        own = (f"S{j}", f"L{j}") if shorts_first_last and j == stages - 1 else (f"L{j}", f"S{j}")
        order[j + 1] = ((f"L{j - 1}",) if j else ()) + own
    if stages:
        order[stages + 1] = (f"L{stages - 1}",)
    if jam_router is not None:
        order[jam_router] = order.get(jam_router, ()) + ("J",)
    return BlockPreference(order)


def reference_schedule(instance: Instance, prefs: Optional[BlockPreference] = None) -> Trace:
    unlabeled = [p.id for p in instance.packets if p.block is None]
    if unlabeled:
        raise InstanceError(f"unlabeled packets {unlabeled[:10]}")
    if prefs is None:
        prefs = canonical_prefs(instance)
    prefs.bind(instance)
    return simulate(instance, block_policy(prefs))


def certificate(instance: Instance, trace: Trace) -> OptResult:
    """Wrap any valid schedule as an (inexact) upper-bound certificate."""
    _, value = flow_times(instance, trace)
    return OptResult(value, trace, 0, exact=False)


def load_lower_bound(instance: Instance) -> int:
    """max over routers i and release cut-offs t0 of min e_i + |S| - max r.

    ``S`` is the set of packets needing router ``i`` released at or after
    ``t0``; ``e_i(p) = r(p) + i - origin(p)`` is the earliest step ``p`` can
    reach router ``i``.
    """
    if not instance.packets:
        return 0
    best = max(p.length for p in instance.packets)
    for i in range(1, instance.k + 1):
        need = sorted(
            ((p.release, p.release + i - p.origin) for p in instance.packets if p.origin <= i <= p.last_router),
            reverse=True,
        )
        if not need:
            continue
        max_r = need[0][0]
        min_e = None
        for count, (_, e) in enumerate(need, start=1):
            min_e = e if min_e is None else min(min_e, e)
            best = max(best, min_e + count - max_r)
    return best


class BudgetExhausted(Exception):
    pass


class _Search:
    """Depth-first feasibility test for max flow time <= F."""

    def __init__(self, instance: Instance, F: int, budget: int, zealous: bool, canonical: bool, edf: bool):
        pk = sorted(instance.packets, key=lambda p: (p.release, p.id))
        self.pk = pk
        self.n = len(pk)
        self.k = instance.k
        self.rel = [p.release for p in pk]
        self.org = [p.origin for p in pk]
        self.lng = [p.length for p in pk]
        self.ids = [p.id for p in pk]
        self.dl = [[p.release + F - p.length + j for j in range(p.length)] for p in pk]
        classes: dict[tuple, int] = {}
        self.cls = [classes.setdefault((p.release, p.origin, p.length), len(classes)) for p in pk]
        self.zealous = zealous
        self.canonical = canonical
        self.edf = edf
        self.budget = budget
        self.horizon = instance.default_horizon()
        self.nodes = 0
        self.failed: set = set()

    def run(self) -> Optional[list[tuple[int, int, int]]]:
        if not self.n:
            return []
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 20000))
        try:
            return self._dfs(min(self.rel), tuple([0] * self.n), tuple(self.rel))
        finally:
            sys.setrecursionlimit(limit)

    def _edf_ok(self, t: int, hops, avail) -> bool:
        jobs: dict[int, list[tuple[int, int]]] = {}
        for p in range(self.n):
            h = hops[p]
            if h == self.lng[p]:
                continue
            e0 = max(avail[p], t)
            d = self.dl[p]
            for j in range(h, self.lng[p]):
                jobs.setdefault(self.org[p] + j, []).append((e0 + j - h, d[j]))
        for lst in jobs.values():
            lst.sort()
            heap: list[int] = []
            now = lst[0][0]
            idx = 0
            m = len(lst)
            while idx < m or heap:
                if not heap and lst[idx][0] > now:
                    now = lst[idx][0]
                while idx < m and lst[idx][0] <= now:
                    heapq.heappush(heap, lst[idx][1])
                    idx += 1
                if heapq.heappop(heap) < now:
                    return False
                now += 1
        return True

    def _dfs(self, t: int, hops: tuple, avail: tuple):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExhausted
        n = self.n
        live = [p for p in range(n) if hops[p] < self.lng[p]]
        if not live:
            return []
        if t > self.horizon:
            return None
        for p in live:
            if max(avail[p], t) > self.dl[p][hops[p]]:
                return None
        key = (t, hops, tuple(max(a, t) for a in avail))
        if key in self.failed:
            return None
        if self.edf and not self._edf_ok(t, hops, avail):
            self.failed.add(key)
            return None

        waiting: dict[int, list[int]] = {}
        for p in live:
            if avail[p] <= t:
                waiting.setdefault(self.org[p] + hops[p], []).append(p)
        if not waiting:
            nxt = min(avail[p] for p in live)
            res = self._dfs(nxt, hops, avail)
            if res is None:
                self.failed.add(key)
            return res

        routers = sorted(waiting)
        options = []
        for r in routers:
            cand = waiting[r]
            if self.canonical:
                # identical packets go in release (= index) order
                first: dict[int, int] = {}
                for p in cand:
                    c = self.cls[p]
                    if c not in first or p < first[c]:
                        first[c] = p
                cand = list(first.values())
            cand = sorted(cand, key=lambda p: (self.dl[p][hops[p]], p))
            options.append(cand if self.zealous else cand + [None])

        for combo in itertools.product(*options):
            new_h = list(hops)
            new_a = list(avail)
            step = []
            for r, p in zip(routers, combo):
                if p is None:
                    continue
                new_h[p] += 1
                new_a[p] = t + 1
                step.append((t, r, self.ids[p]))
            res = self._dfs(t + 1, tuple(new_h), tuple(new_a))
            if res is not None:
                return step + res
        self.failed.add(key)
        return None


def feasible(
    instance: Instance,
    F: int,
    budget: int = DEFAULT_BUDGET,
    zealous: bool = True,
    canonical: bool = True,
    edf: bool = True,
):
    """``(trace or None, nodes)``; raises ``BudgetExhausted`` past ``budget`` nodes."""
    s = _Search(instance, F, budget, zealous, canonical, edf)
    out = s.run()
    return (None if out is None else Trace(tuple(out))), s.nodes


def brute_force_opt(instance: Instance, node_budget: int = DEFAULT_BUDGET, canonical: bool = True) -> OptResult:
    """Exact optimum over zealous schedules; the budget applies to each probe."""
    if node_budget <= 0:
        raise ValueError("node_budget must be positive")
    if not instance.packets:
        return OptResult(0, Trace(), 0, exact=True)
    greedy = simulate(instance, GREEDY)
    _, hi = flow_times(instance, greedy)
    best = greedy
    lo = load_lower_bound(instance)
    nodes = 0
    exact = True
    while lo < hi:
        mid = (lo + hi) // 2
        try:
            witness, used = feasible(instance, mid, node_budget, canonical=canonical)
        except BudgetExhausted:
            nodes += node_budget
            exact = False
            lo = mid + 1
            continue
        nodes += used
        if witness is None:
            lo = mid + 1
        else:
            best = witness
            _, hi = flow_times(instance, witness)
    return OptResult(hi, best, nodes, exact)


def exhaustive_opt(instance: Instance) -> tuple[int, Trace]:
    """Optimum over all schedules (idling allowed) within the default horizon."""
    if not instance.packets:
        return 0, Trace()
    F = max(p.length for p in instance.packets)
    while True:
        witness, _ = feasible(instance, F, budget=10**12, zealous=False, canonical=False, edf=False)
        if witness is not None:
            return flow_times(instance, witness)[1], witness
        F += 1

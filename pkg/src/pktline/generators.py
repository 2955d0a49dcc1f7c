"""Instance families with closed-form flow times, and two adaptive adversaries.

Packet ids follow generation order, block by block. The adversaries target
deterministic policies: they extend an instance, re-simulate, and read the
policy's actual backlog off the trace instead of assuming a worst case.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import Instance, InstanceError, Packet, Trace, flow_times
from .engine import simulate
from .offline import reference_schedule, staged_prefs
from .policies import BlockPreference, Policy


@dataclass(frozen=True)
class FamilyPrediction:
    greedy_max_flow: int
    opt_max_flow: int
    greedy_blocks: dict[str, int]
    opt_blocks: dict[str, int]


class _Builder:
    def __init__(self, k: int):
        self.k = k
        self.packets: list[Packet] = []

    def block(self, label: str, count: int, release: int, origin: int, length: int) -> None:
        start = len(self.packets)
        self.packets.extend(Packet(start + j, release, origin, length, label) for j in range(count))

    def build(self) -> Instance:
        return Instance(self.k, tuple(self.packets))


def gen_prop_k2(h: int) -> Instance:
    """Two routers: A1 (h short, t=0), B1 (h long, t=2), B2 (2h short on router 2, t=h+3)."""
    if h < 4:
        raise InstanceError(f"h must be >= 4, got {h}")
    b = _Builder(2)
    b.block("A1", h, 0, 1, 1)
    b.block("B1", h, 2, 1, 2)
    b.block("B2", 2 * h, h + 3, 2, 1)
    return b.build()


def family_sizes(k: int, h: int) -> tuple[dict[int, int], dict[int, int], dict[int, int]]:
    """Block sizes |A_i|, |B_i| and the base release times r_i."""
    A = {i: 2 ** (k - 1 - i) * h for i in range(1, k)}
    B = {i: (2 ** (k - 1) - 2 ** (k - 1 - i)) * h for i in range(1, k)}
    B[k] = 2 ** (k - 1) * h
    r = {i: sum(B[j] for j in range(1, i)) + max(0, i - 2) for i in range(1, k + 1)}
    return A, B, r


def predict_greedy_family(k: int, h: int) -> FamilyPrediction:
    half = 2 ** (k - 1) * h
    g = {"A1": 2 ** (k - 2) * h, "B1": half - 1, f"B{k}": (2**k - 1) * h - 1}
    o = {"A1": half, "B1": 2 ** (k - 2) * h + 1, f"B{k}": half + 1}
    for i in range(2, k):
        g[f"A{i}"] = (2 ** (k - 1) - 2 ** (k - 1 - i)) * h + 1
        g[f"B{i}"] = (2**k - 2 ** (k - i)) * h
        o[f"A{i}"] = half + 3
        o[f"B{i}"] = (2 ** (k - 1) - 2 ** (k - 1 - i)) * h + 2
    # for k = 2 there is no A_i with i >= 2, so the maximum is B_k's |B_k| + 1
    return FamilyPrediction(max(g.values()), max(o.values()), g, o)


def gen_greedy_family(k: int, h: int) -> tuple[Instance, FamilyPrediction]:
    if k < 2 or h < 2:
        raise InstanceError(f"need k >= 2 and h >= 2, got k={k}, h={h}")
    A, B, r = family_sizes(k, h)
    b = _Builder(k)
    for i in range(1, k):
        b.block(f"A{i}", A[i], r[i], max(1, i - 1), 1 if i == 1 else 2)
        b.block(f"B{i}", B[i], r[i] + 2, i, 2)
    b.block(f"B{k}", B[k], r[k] + 2, k, 1)
    return b.build(), predict_greedy_family(k, h)


def gen_warmup_65(h: int, with_jam: bool) -> Instance:
    """2h shorts at t=0, h longs at t=h, optionally 3h jam packets on router 2 at t=2h+1."""
    if h < 1:
        raise InstanceError(f"h must be >= 1, got {h}")
    b = _Builder(2)
    b.block("S", 2 * h, 0, 1, 1)
    b.block("L", h, h, 1, 2)
    if with_jam:
        b.block("J", 3 * h, 2 * h + 1, 2, 1)
    return b.build()


def random_instance(
    rng: random.Random,
    k: int,
    n: int,
    lengths: tuple[int, ...] = (1, 2),
    max_release: Optional[int] = None,
) -> Instance:
    """Uniform packets for property runs; origins are drawn so each packet fits."""
    if max_release is None:
        max_release = 2 * n
    pk = []
    for pid in range(n):
        length = rng.choice([x for x in lengths if x <= k])
        origin = rng.randint(1, k - length + 1)
        pk.append(Packet(pid, rng.randint(0, max_release), origin, length))
    return Instance(k, tuple(pk))


@dataclass
class StageRecord:
    t: int
    router: int
    U: int
    L: int
    longs_early: int = 0
    next_L: int = 0
    prefix_max_flow: int = 0
    prefix_offline: int = 0

    @property
    def slack(self) -> Fraction:
        """Additive constant b for which the measured backlog recursion holds.

        From the policy's prefix excess over 4/3 of (U + 1): the last of the
        L + U packets owed on this router forces L + U + y <= prefix max flow.
        """
        return Fraction(self.prefix_max_flow) - Fraction(4, 3) * (self.U + 1) + Fraction(4, 3)


@dataclass
class AdversaryResult:
    instance: Instance
    ratio: Fraction
    policy_value: int
    offline_value: int
    offline_trace: Trace
    branch: str = ""
    stage_log: list[StageRecord] = field(default_factory=list)


def _max_flow(instance: Instance, trace: Trace) -> int:
    return flow_times(instance, trace)[1]


def _certified(instance: Instance, prefs: BlockPreference) -> tuple[int, Trace]:
    """Value of a validated block-preference schedule."""
    trace = reference_schedule(instance, prefs)
    return _max_flow(instance, trace), trace


def adversary_65(policy: Policy, h: int) -> AdversaryResult:
    """Stop after the shorts and longs, or add the jam, whichever hurts more."""
    base = gen_warmup_65(h, False)
    run = simulate(base, policy)
    y = sum(
        1
        for p in base.packets
        if p.block == "L" and run.step_on(p.id, 1) is not None and run.step_on(p.id, 1) < 2 * h
    )
    jammed = gen_warmup_65(h, True)
    options = []
    for label, inst, prefs in (
        ("stop", base, BlockPreference({1: ("S", "L"), 2: ("L",)})),
        ("jam", jammed, BlockPreference({1: ("L", "S"), 2: ("L", "J")})),
    ):
        trace = run if inst is base else simulate(inst, policy)
        value = _max_flow(inst, trace)
        off, off_trace = _certified(inst, prefs)
        options.append((Fraction(value, off), label, inst, value, off, off_trace))
    ratio, label, inst, value, off, off_trace = max(options, key=lambda o: o[0])
    log = [StageRecord(0, 1, 2 * h, 0, longs_early=y)]
    return AdversaryResult(inst, ratio, value, off, off_trace, branch=label, stage_log=log)


def _backlog(instance: Instance, trace: Trace, router: int, t: int) -> int:
    """Packets alive at ``t`` that the trace has not yet processed on ``router``."""
    count = 0
    for p in instance.packets:
        if p.release <= t and p.origin <= router <= p.last_router:
            s = trace.step_on(p.id, router)
            if s is None or s >= t:
                count += 1
    return count


def adversary_43(policy: Policy, stages: int, ell: int) -> AdversaryResult:
    """Staged shorts/longs on routers 1..stages, then a jam on router stages+1.

    The line has ``k = 2**stages * ell`` routers so every U stays even.
    """
    if stages < 0 or ell < 1:
        raise ValueError(f"need stages >= 0 and ell >= 1, got {stages}, {ell}")
    k = 2**stages * ell
    if stages + 1 > k:
        raise ValueError(f"{stages} stages need {stages + 1} routers, line has {k}")
    inst = Instance(k)
    if stages == 0:
        return AdversaryResult(inst, Fraction(1), 0, 0, Trace())
    t, U = 0, k
    log: list[StageRecord] = []
    prev_run: Optional[Trace] = None
    L = 0
    for j in range(stages):
        router = j + 1
        nid = inst.next_id()
        shorts = [Packet(nid + m, t, router, 1, f"S{j}") for m in range(U)]
        longs = [Packet(nid + U + m, t + U // 2, router, 2, f"L{j}") for m in range(U // 2)]
        inst = inst.extend(shorts + longs)
        run = simulate(inst, policy)
        if prev_run is not None and run.restrict(t).assignments != prev_run.restrict(t).assignments:
            raise RuntimeError(f"policy {policy.name} is not deterministic: prefix runs disagree before t={t}")
        rec = StageRecord(t, router, U, L)
        rec.longs_early = sum(1 for p in longs if run.step_on(p.id, router) < t + U)
        t_next = t + U + 1
        rec.next_L = _backlog(inst, run, router + 1, t_next)
        rec.prefix_max_flow = _max_flow(inst, run)
        rec.prefix_offline, off_trace = _certified(inst, staged_prefs(j + 1, shorts_first_last=True))
        log.append(rec)
        if Fraction(rec.prefix_max_flow) > Fraction(4, 3) * rec.prefix_offline:
            return AdversaryResult(
                inst,
                Fraction(rec.prefix_max_flow, rec.prefix_offline),
                rec.prefix_max_flow,
                rec.prefix_offline,
                off_trace,
                branch=f"prefix-{j}",
                stage_log=log,
            )
        prev_run = run
        t, U, L = t_next, U * 3 // 2, rec.next_L
    router = stages + 1
    nid = inst.next_id()
    inst = inst.extend(Packet(nid + m, t, router, 1, "J") for m in range(U))
    run = simulate(inst, policy)
    value = _max_flow(inst, run)
    off, off_trace = _certified(inst, staged_prefs(stages, shorts_first_last=False, jam_router=router))
    log.append(StageRecord(t, router, U, L, prefix_max_flow=value, prefix_offline=off))
    return AdversaryResult(inst, Fraction(value, off), value, off, off_trace, branch="jam", stage_log=log)


def random_block_instance(
    rng: random.Random,
    k: int,
    n: int,
    blocks: Optional[int] = None,
    lengths: tuple[int, ...] = (1, 2),
    spread: int = 4,
) -> Instance:
    """Random instance built from a few bursts of identical packets.

    Bursts of same-release, same-origin packets are where the policies
    disagree, so these make sharper property corpora than uniform draws.
    """
    if blocks is None:
        blocks = rng.randint(1, max(1, min(n, 4)))
    sizes = [1] * blocks
    for _ in range(n - blocks):
        sizes[rng.randrange(blocks)] += 1
    pk = []
    for b, size in enumerate(sizes):
        length = rng.choice([x for x in lengths if x <= k])
        origin = rng.randint(1, k - length + 1)
        release = rng.randint(0, spread * b)
        start = len(pk)
        pk.extend(Packet(start + j, release, origin, length, f"X{b}") for j in range(size))
    return Instance(k, tuple(pk))


def random_family_like(rng: random.Random, k: int, n: int, jitter: int = 1) -> Instance:
    """Lower-bound family layout with random block sizes summing to ``n``.

    Base releases follow the family's rule ``r_i = sum_{j<i} |B_j| +
    max(0, i-2)`` for the drawn sizes; every block is then shifted by up to
    ``jitter`` steps either way. Draws land near the configurations where
    Greedy loses to the offline schedule.
    """
    if k < 2:
        return random_instance(rng, k, n)
    sizes = {}
    labels = [f"A{i}" for i in range(1, k)] + [f"B{i}" for i in range(1, k + 1)]
    for lab in labels:
        sizes[lab] = 0
    for _ in range(n):
        sizes[rng.choice(labels)] += 1
    pk: list[Packet] = []

    def add(label: str, release: int, origin: int, length: int) -> None:
        start = len(pk)
        release = max(0, release + rng.randint(-jitter, jitter))
        pk.extend(Packet(start + j, release, origin, length, label) for j in range(sizes[label]))

    for i in range(1, k + 1):
        r = sum(sizes[f"B{j}"] for j in range(1, i)) + max(0, i - 2)
        if i < k:
            add(f"A{i}", r, max(1, i - 1), 1 if i == 1 else 2)
            add(f"B{i}", r + 2, i, 2)
    add(f"B{k}", r + 2, k, 1)
    return Instance(k, tuple(pk))

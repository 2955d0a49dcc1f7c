"""Synchronous simulation loop and trace validation.

At step ``t`` every router with a waiting packet forwards exactly one. A
packet forwarded at ``t`` waits at the next router from ``t + 1``; a packet
released at ``t`` is available at its origin at ``t``.

Static-key policies run through a ranked-heap kernel, compiled if the
``_kernel`` extension imports and pure Python otherwise. Set
``PKTLINE_PURE=1`` to force the Python kernel.
"""
from __future__ import annotations

import bisect
import os
from typing import Optional

import numpy as np

from .core import (
    Instance,
    InvalidTraceError,
    LocalView,
    PacketState,
    QueueEntry,
    Trace,
    Violation,
)
from .policies import HopTable, Policy
from . import _pykernel

try:
    if os.environ.get("PKTLINE_PURE"):
        raise ImportError("pure Python kernel requested")
    from . import _kernel as _ckernel
except ImportError:
    _ckernel = None

BACKEND = "compiled" if _ckernel is not None else "python"


class SimulationError(RuntimeError):
    def __init__(self, stuck: list[int], horizon: int):
        self.stuck = stuck
        self.horizon = horizon
        shown = ", ".join(map(str, stuck[:10]))
        super().__init__(
            f"horizon {horizon} reached with {len(stuck)} incomplete packets: {shown}"
        )


class PolicyError(RuntimeError):
    pass


def _kernel_for(backend: Optional[str]):
    backend = backend or "auto"
    if backend == "python":
        return _pykernel
    if backend == "compiled":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not built; reinstall with Cython available")
        return _ckernel
    if backend == "auto":
        return _ckernel or _pykernel
    raise ValueError(f"unknown backend {backend!r}")


def hop_table(instance: Instance) -> tuple[HopTable, np.ndarray]:
    """Rows for every (packet, hop) in packet order, plus each packet's first row."""
    pk = instance.packets
    length = np.fromiter((p.length for p in pk), dtype=np.int64, count=len(pk))
    offset = np.zeros(len(pk), dtype=np.int64)
    np.cumsum(length[:-1], out=offset[1:])
    owner = np.repeat(np.arange(len(pk)), length)
    hop = np.arange(len(owner)) - offset[owner]
    origin = np.fromiter((p.origin for p in pk), dtype=np.int64, count=len(pk))[owner]
    release = np.fromiter((p.release for p in pk), dtype=np.int64, count=len(pk))[owner]
    ids = np.fromiter((p.id for p in pk), dtype=np.int64, count=len(pk))[owner]
    blocks = [p.block for p in pk for _ in range(p.length)]
    lng = length[owner]
    return HopTable(origin + hop, release, lng, lng - hop, ids, blocks), offset


def hop_ranks(instance: Instance, policy: Policy):
    """Arrays for the kernel: packet fields, per-packet hop offset, global hop rank."""
    table, offset = hop_table(instance)
    if policy.key_columns is not None:
        cols = policy.key_columns(table)
        order = np.lexsort(tuple(reversed(cols)))
    else:
        keys = [
            policy.order_key(int(r), QueueEntry(int(i), int(rel), int(ln), int(rem), b))
            for r, i, rel, ln, rem, b in zip(
                table.router, table.id, table.release, table.length, table.remaining, table.block
            )
        ]
        order = np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    pk = instance.packets
    release = np.fromiter((p.release for p in pk), dtype=np.int64, count=len(pk))
    origin = np.fromiter((p.origin for p in pk), dtype=np.int64, count=len(pk))
    length = np.fromiter((p.length for p in pk), dtype=np.int64, count=len(pk))
    return release, origin, length, offset, rank


def simulate(
    instance: Instance,
    policy: Policy,
    horizon: Optional[int] = None,
    backend: Optional[str] = None,
) -> Trace:
    """Run ``policy`` on ``instance`` from step 0 until every packet is done."""
    if horizon is None:
        horizon = instance.default_horizon()
    if not instance.packets:
        return Trace()
    if policy.order_key is None:
        return _simulate_views(instance, policy, horizon)
    kernel = _kernel_for(backend)
    release, origin, length, offset, rank = hop_ranks(instance, policy)
    times, routers, idxs, done = kernel.simulate_ranked(
        release, origin, length, offset, rank, instance.k, horizon
    )
    times = np.asarray(times, dtype=np.int64)
    routers = np.asarray(routers, dtype=np.int64)
    ids = np.fromiter((p.id for p in instance.packets), dtype=np.int64, count=len(instance))
    pids = ids[np.asarray(idxs, dtype=np.int64)]
    order = np.lexsort((routers, times))
    trace = Trace(tuple(zip(times[order].tolist(), routers[order].tolist(), pids[order].tolist())))
    if done < len(instance):
        _raise_stuck(instance, trace, horizon)
    return trace


def _raise_stuck(instance: Instance, trace: Trace, horizon: int):
    hops = trace.hops
    stuck = sorted(p.id for p in instance.packets if len(hops.get(p.id, ())) < p.length)
    raise SimulationError(stuck, horizon)


def _simulate_views(instance: Instance, policy: Policy, horizon: int) -> Trace:
    """Slow path: build a LocalView per busy router and ask ``policy.select``."""
    states = sorted((PacketState.fresh(p) for p in instance.packets), key=lambda s: s.packet.release)
    waiting: dict[int, dict[int, PacketState]] = {}
    incoming: list[PacketState] = []
    out = []
    ptr = 0
    done = 0
    t = 0
    n = len(states)
    while done < n:
        if not waiting and not incoming:
            t = max(t, states[ptr].packet.release)
        if t > horizon:
            break
        for s in incoming:
            waiting.setdefault(s.location, {})[s.packet.id] = s
        incoming = []
        while ptr < n and states[ptr].packet.release <= t:
            s = states[ptr]
            waiting.setdefault(s.packet.origin, {})[s.packet.id] = s
            ptr += 1
        for router in sorted(waiting):
            queue = waiting[router]
            view = LocalView(
                router,
                t,
                tuple(
                    QueueEntry(s.packet.id, s.packet.release, s.packet.length, s.remaining, s.packet.block)
                    for s in queue.values()
                ),
            )
            pid = policy.select(view)
            if pid not in queue:
                raise PolicyError(f"{policy.name} chose {pid}, not queued at router {router}, t={t}")
            s = queue.pop(pid)
            if not queue:
                del waiting[router]
            out.append((t, router, pid))
            s.advance(t)
            if s.remaining == 0:
                done += 1
            else:
                incoming.append(s)
        t += 1
    trace = Trace(tuple(out))
    if done < n:
        _raise_stuck(instance, trace, horizon)
    return trace


def validate_trace(instance: Instance, trace: Trace) -> list[Violation]:
    """Every rule a trace breaks, as data; an empty list means valid."""
    bad: list[Violation] = []
    by_id = instance.by_id
    seen_slots: dict[tuple[int, int], int] = {}
    for t, r, pid in trace.assignments:
        if (t, r) in seen_slots:
            bad.append(Violation(pid, t, r, "router capacity"))
        else:
            seen_slots[(t, r)] = pid
        if pid not in by_id:
            bad.append(Violation(pid, t, r, "unknown packet"))
        if not 1 <= r <= instance.k:
            bad.append(Violation(pid, t, r, "router out of range"))
    hops = trace.hops
    for p in instance.packets:
        hs = hops.get(p.id, [])
        if len(hs) != p.length:
            t, r = hs[-1] if hs else (-1, p.origin)
            bad.append(Violation(p.id, t, r, f"hop count {len(hs)} != length {p.length}"))
        prev = None
        for j, (t, r) in enumerate(hs):
            if r != p.origin + j:
                bad.append(Violation(p.id, t, r, f"hop order: expected router {p.origin + j}"))
            if j == 0 and t < p.release:
                bad.append(Violation(p.id, t, r, "processed before release"))
            if prev is not None and t - prev < 1:
                bad.append(Violation(p.id, t, r, "transfer gap"))
            prev = t
    return bad


def check_trace(instance: Instance, trace: Trace) -> None:
    violations = validate_trace(instance, trace)
    if violations:
        raise InvalidTraceError(violations)


def waiting_intervals(instance: Instance, trace: Trace):
    """Yield ``(router, available_from, processed_at, packet)`` for every hop."""
    hops = trace.hops
    for p in instance.packets:
        avail = p.release
        for t, r in hops[p.id]:
            yield r, avail, t, p
            avail = t + 1


def is_zealous(instance: Instance, trace: Trace) -> bool:
    """True iff no router idles while a packet waits on it."""
    check_trace(instance, trace)
    busy: dict[int, list[int]] = {}
    for t, r, _ in trace.assignments:
        busy.setdefault(r, []).append(t)
    for r, avail, t, _ in waiting_intervals(instance, trace):
        times = busy[r]
        if bisect.bisect_left(times, t) - bisect.bisect_left(times, avail) != t - avail:
            return False
    return True


def replay_mismatches(instance: Instance, trace: Trace, policy: Policy) -> list[tuple[int, int, int, int]]:
    """Steps where ``trace`` differs from what ``policy`` would pick on the same queue.

    Returns ``(time, router, chosen, expected)``; idle steps with a waiting
    packet are reported with ``chosen = -1``.
    """
    check_trace(instance, trace)
    queues: dict[tuple[int, int], list[QueueEntry]] = {}
    for r, avail, t, p in waiting_intervals(instance, trace):
        remaining = p.last_router - r + 1
        for s in range(avail, t + 1):
            queues.setdefault((s, r), []).append(QueueEntry(p.id, p.release, p.length, remaining, p.block))
    chosen = {(t, r): pid for t, r, pid in trace.assignments}
    out = []
    for (t, r), q in sorted(queues.items()):
        expected = policy.select(LocalView(r, t, tuple(q)))
        got = chosen.get((t, r), -1)
        if got != expected:
            out.append((t, r, got, expected))
    return out

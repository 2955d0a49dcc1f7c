"""Domain types and the priority/delay arithmetic shared by every module.

Time is discrete. Routers are numbered 1..k; the passive terminal router k+1
is never modelled. A packet processed on its last router at step ``s``
completes at ``s + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Optional


class InstanceError(ValueError):
    """An instance or packet violates its structural invariants."""


@dataclass(frozen=True)
class Packet:
    id: int
    release: int
    origin: int
    length: int
    block: Optional[str] = None

    @property
    def last_router(self) -> int:
        return self.origin + self.length - 1

    def routers(self) -> range:
        return range(self.origin, self.origin + self.length)

    def check(self, k: int) -> None:
        if self.id < 0:
            raise InstanceError(f"packet {self.id}: negative id")
        if self.release < 0:
            raise InstanceError(f"packet {self.id}: negative release {self.release}")
        if self.length < 1:
            raise InstanceError(f"packet {self.id}: length must be >= 1, got {self.length}")
        if self.origin < 1 or self.origin + self.length > k + 1:
            raise InstanceError(
                f"packet {self.id}: origin {self.origin} with length {self.length} "
                f"does not fit on {k} routers"
            )


@dataclass(frozen=True)
class Instance:
    k: int
    packets: tuple[Packet, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "packets", tuple(self.packets))
        if self.k < 1:
            raise InstanceError(f"k must be positive, got {self.k}")
        seen: set[int] = set()
        for p in self.packets:
            p.check(self.k)
            if p.id in seen:
                raise InstanceError(f"duplicate packet id {p.id}")
            seen.add(p.id)

    def __len__(self) -> int:
        return len(self.packets)

    @cached_property
    def by_id(self) -> dict[int, Packet]:
        return {p.id: p for p in self.packets}

    def blocks(self) -> dict[str, list[Packet]]:
        """Block label -> packets carrying it, in instance order."""
        out: dict[str, list[Packet]] = {}
        for p in self.packets:
            if p.block is not None:
                out.setdefault(p.block, []).append(p)
        return out

    def extend(self, packets: Iterable[Packet]) -> "Instance":
        return Instance(self.k, self.packets + tuple(packets))

    def next_id(self) -> int:
        return max((p.id for p in self.packets), default=-1) + 1

    def default_horizon(self) -> int:
        """Upper bound on the last busy step of any zealous schedule."""
        if not self.packets:
            return 0
        return max(p.release for p in self.packets) + sum(p.length for p in self.packets) + self.k


@dataclass
class PacketState:
    """Mutable per-run bookkeeping; ``remaining`` counts hops still to take."""

    packet: Packet
    remaining: int
    available: int
    completion: Optional[int] = None

    @classmethod
    def fresh(cls, packet: Packet) -> "PacketState":
        return cls(packet, packet.length, packet.release)

    @property
    def location(self) -> int:
        return self.packet.origin + self.packet.length - self.remaining

    def advance(self, step: int) -> None:
        self.remaining -= 1
        self.available = step + 1
        if self.remaining == 0:
            self.completion = step + 1


class QueueEntry(NamedTuple):
    id: int
    release: int
    length: int
    remaining: int
    block: Optional[str] = None


@dataclass(frozen=True)
class LocalView:
    """Everything a router may look at when it picks a packet."""

    router: int
    now: int
    queue: tuple[QueueEntry, ...]


class Violation(NamedTuple):
    packet: int
    time: int
    router: int
    rule: str

    def __str__(self) -> str:
        return f"packet {self.packet} at t={self.time} router {self.router}: {self.rule}"


class InvalidTraceError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        head = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"invalid trace: {head}{more}")


@dataclass(frozen=True)
class Trace:
    """A schedule as (time, router, packet id) triples sorted by (time, router)."""

    assignments: tuple[tuple[int, int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))

    def __len__(self) -> int:
        return len(self.assignments)

    @property
    def horizon(self) -> int:
        """Last step with any assignment, -1 for an empty trace."""
        return self.assignments[-1][0] if self.assignments else -1

    @cached_property
    def hops(self) -> dict[int, list[tuple[int, int]]]:
        """Packet id -> [(time, router), ...] in time order."""
        out: dict[int, list[tuple[int, int]]] = {}
        for t, r, pid in self.assignments:
            out.setdefault(pid, []).append((t, r))
        return out

    def step_on(self, pid: int, router: int) -> Optional[int]:
        for t, r in self.hops.get(pid, ()):
            if r == router:
                return t
        return None

    def restrict(self, before: int) -> "Trace":
        """Assignments at steps strictly earlier than ``before``."""
        return Trace(tuple(a for a in self.assignments if a[0] < before))


def _check_time(release: int, now: int) -> None:
    if now < release:
        raise ValueError(f"now={now} precedes release={release}")


def priority(release: int, length: int, remaining: int, now: int) -> int:
    """Flow time the packet would get if it were never delayed again."""
    _check_time(release, now)
    if not 1 <= remaining <= length:
        raise ValueError(f"remaining={remaining} outside [1, {length}]")
    return now - release + remaining


def delay(release: int, length: int, remaining: int, now: int) -> int:
    """Steps spent in the system minus hops already completed."""
    _check_time(release, now)
    if not 0 <= remaining <= length:
        raise ValueError(f"remaining={remaining} outside [0, {length}]")
    d = now - release - (length - remaining)
    if d < 0:
        raise ValueError(
            f"inconsistent state: {length - remaining} hops cannot be done in {now - release} steps"
        )
    return d


def completion_times(trace: Trace) -> dict[int, int]:
    return {pid: hs[-1][0] + 1 for pid, hs in trace.hops.items()}


def flow_times(instance: Instance, trace: Trace) -> tuple[dict[int, int], int]:
    """Per-packet flow time and the maximum over all packets (0 when empty)."""
    from .engine import validate_trace

    violations = validate_trace(instance, trace)
    if violations:
        raise InvalidTraceError(violations)
    done = completion_times(trace)
    flows = {p.id: done[p.id] - p.release for p in instance.packets}
    return flows, max(flows.values(), default=0)


def block_flows(instance: Instance, flows: dict[int, int]) -> dict[str, int]:
    """Maximum flow time per block label."""
    out: dict[str, int] = {}
    for p in instance.packets:
        if p.block is not None:
            out[p.block] = max(out.get(p.block, 0), flows[p.id])
    return out

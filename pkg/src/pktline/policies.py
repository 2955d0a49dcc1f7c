"""Local forwarding policies.

Each built-in policy is a static ordering: on router ``r`` a waiting packet
gets a key that does not change while it waits, and the smallest key is
forwarded. Greedy's priority ``now - release + remaining`` grows by one per
waiting step for every packet alike, so ordering by ``release - remaining``
is the same choice. Static keys let the engine use heaps and the compiled
kernel; ``select`` stays available for callers holding a ``LocalView``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import Instance, InstanceError, LocalView, QueueEntry, priority

OrderKey = Callable[[int, QueueEntry], tuple]


@dataclass(frozen=True)
class HopTable:
    """One row per (packet, hop): the columns an order key may read."""

    router: np.ndarray
    release: np.ndarray
    length: np.ndarray
    remaining: np.ndarray
    id: np.ndarray
    block: list


@dataclass(frozen=True)
class Policy:
    name: str
    select: Callable[[LocalView], int]
    # None for policies whose choice depends on more than a static key
    order_key: Optional[OrderKey] = field(default=None, compare=False)
    # vectorised order_key: most significant column first
    key_columns: Optional[Callable[[HopTable], tuple]] = field(default=None, compare=False)


def greedy_select(view: LocalView) -> int:
    """Highest priority first; ties to the earlier release, then the smaller id."""
    best = max(
        view.queue,
        key=lambda e: (priority(e.release, e.length, e.remaining, view.now), -e.release, -e.id),
    )
    return best.id


def _greedy_key(router: int, e: QueueEntry) -> tuple:
    return (e.release - e.remaining, e.release, e.id)


def _earliest_arrival_key(router: int, e: QueueEntry) -> tuple:
    return (e.release, e.id)


def _furthest_to_go_key(router: int, e: QueueEntry) -> tuple:
    return (-e.remaining, e.release, e.id)


def earliest_arrival_select(view: LocalView) -> int:
    return min(view.queue, key=lambda e: _earliest_arrival_key(view.router, e)).id


def furthest_to_go_select(view: LocalView) -> int:
    return min(view.queue, key=lambda e: _furthest_to_go_key(view.router, e)).id


GREEDY = Policy(
    "greedy",
    greedy_select,
    _greedy_key,
    lambda h: (h.release - h.remaining, h.release, h.id),
)
EARLIEST_ARRIVAL = Policy(
    "earliest-arrival",
    earliest_arrival_select,
    _earliest_arrival_key,
    lambda h: (h.release, h.id),
)
FURTHEST_TO_GO = Policy(
    "furthest-to-go",
    furthest_to_go_select,
    _furthest_to_go_key,
    lambda h: (-h.remaining, h.release, h.id),
)

BUILTINS: dict[str, Policy] = {p.name: p for p in (GREEDY, EARLIEST_ARRIVAL, FURTHEST_TO_GO)}


@dataclass(frozen=True)
class BlockPreference:
    """Per-router block ranking; earlier labels win, unlisted labels rank last."""

    order: Mapping[int, tuple[str, ...]]

    def rank(self, router: int, label: Optional[str]) -> int:
        labels = self.order.get(router, ())
        if label is not None and label in labels:
            return labels.index(label)
        return len(labels)

    def labels(self) -> set[str]:
        return {lab for labs in self.order.values() for lab in labs}

    def bind(self, instance: Instance) -> "BlockPreference":
        missing = self.labels() - set(instance.blocks())
        if missing:
            raise InstanceError(f"preference names unknown blocks: {sorted(missing)}")
        return self

    def spec(self) -> str:
        return ";".join(f"{r}=" + ",".join(labs) for r, labs in sorted(self.order.items()))

    @classmethod
    def parse(cls, text: str) -> "BlockPreference":
        """Parse ``"1=B1,A1;2=B1,B2"``."""
        order: dict[int, tuple[str, ...]] = {}
        for part in filter(None, (s.strip() for s in text.split(";"))):
            router, _, labels = part.partition("=")
            if not _:
                raise ValueError(f"bad preference entry {part!r}, expected ROUTER=LABEL,...")
            order[int(router)] = tuple(x.strip() for x in labels.split(",") if x.strip())
        return cls(order)


def block_preference_select(prefs: BlockPreference, view: LocalView) -> int:
    return min(view.queue, key=lambda e: (prefs.rank(view.router, e.block), e.release, e.id)).id


def block_policy(prefs: BlockPreference) -> Policy:
    def order_key(router: int, e: QueueEntry) -> tuple:
        return (prefs.rank(router, e.block), e.release, e.id)

    def key_columns(h: HopTable) -> tuple:
        memo: dict = {}
        ranks = np.fromiter(
            (
                memo[rb] if rb in memo else memo.setdefault(rb, prefs.rank(*rb))
                for rb in zip(h.router.tolist(), h.block)
            ),
            dtype=np.int64,
            count=len(h.block),
        )
        return (ranks, h.release, h.id)

    return Policy(
        f"block:{prefs.spec()}",
        lambda v: block_preference_select(prefs, v),
        order_key,
        key_columns,
    )


def from_select(name: str, select: Callable[[LocalView], int]) -> Policy:
    """Wrap an arbitrary (possibly stateful) selection function."""
    return Policy(name, select)


def get_policy(name: str, instance: Optional[Instance] = None) -> Policy:
    """Resolve a CLI policy name; ``block:auto`` needs the instance."""
    if name in BUILTINS:
        return BUILTINS[name]
    if name.startswith("block:"):
        body = name[len("block:"):]
        if body == "auto":
            if instance is None:
                raise ValueError("block:auto needs an instance")
            from .offline import canonical_prefs

            prefs = canonical_prefs(instance)
        else:
            prefs = BlockPreference.parse(body)
        if instance is not None:
            prefs.bind(instance)
        return block_policy(prefs)
    raise ValueError(f"unknown policy {name!r}; choose from {sorted(BUILTINS)} or block:<spec>")


def policy_names() -> Sequence[str]:
    return tuple(BUILTINS)

"""Pure-Python simulation kernel; the reference for ``_kernel.pyx``.

Both kernels take packets as parallel arrays indexed 0..n-1 plus a rank per
(packet, hop). On each router the waiting packet of smallest rank is
forwarded. Ranks must be static while a packet waits, which holds for every
built-in policy.
"""
from __future__ import annotations

import heapq


def simulate_ranked(release, origin, length, offset, rank, k, horizon):
    """Return ``(times, routers, indices, completed)`` for one run."""
    n = len(release)
    release = [int(x) for x in release]
    origin = [int(x) for x in origin]
    length = [int(x) for x in length]
    offset = [int(x) for x in offset]
    rank = [int(x) for x in rank]
    order = sorted(range(n), key=release.__getitem__)
    hop = [0] * n
    heaps: dict[int, list] = {}
    pending: list[tuple[int, int]] = []
    out_t: list[int] = []
    out_r: list[int] = []
    out_i: list[int] = []
    done = 0
    ptr = 0
    t = 0
    push = heapq.heappush
    pop = heapq.heappop
    while done < n:
        if not heaps and not pending:
            t = max(t, release[order[ptr]])
        if t > horizon:
            break
        for r, i in pending:
            push(heaps.setdefault(r, []), (rank[offset[i] + hop[i]], i))
        pending = []
        while ptr < n and release[order[ptr]] <= t:
            i = order[ptr]
            push(heaps.setdefault(origin[i], []), (rank[offset[i]], i))
            ptr += 1
        for r in list(heaps):
            h = heaps[r]
            _, i = pop(h)
            if not h:
                del heaps[r]
            out_t.append(t)
            out_r.append(r)
            out_i.append(i)
            hop[i] += 1
            if hop[i] == length[i]:
                done += 1
            else:
                pending.append((r + 1, i))
        t += 1
    return out_t, out_r, out_i, done

"""Independent optimum via a time-indexed MILP (scipy / HiGHS).

Shares no code with the search in ``pktline.offline``: it allows idling,
has no zealousness or class canonicalisation, and proves optimality through
the LP relaxation instead of deadline pruning.
"""
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

from pktline.core import Instance


def milp_opt(instance: Instance, upper: int) -> int:
    """Minimum max flow time, given any feasible value ``upper``."""
    if not instance.packets:
        return 0
    cols = []  # (packet index, hop, time)
    for n, p in enumerate(instance.packets):
        for j in range(p.length):
            lo = p.release + j
            hi = p.release + upper - p.length + j
            cols.extend((n, j, t) for t in range(lo, hi + 1))
    nx = len(cols)
    F = nx  # objective variable index
    index = {c: m for m, c in enumerate(cols)}
    rows = []
    lo_b, hi_b = [], []

    def add_row(coefs, lo, hi):
        rows.append(coefs)
        lo_b.append(lo)
        hi_b.append(hi)

    by_hop: dict = {}
    by_slot: dict = {}
    for (n, j, t), m in index.items():
        by_hop.setdefault((n, j), []).append((m, t))
        p = instance.packets[n]
        by_slot.setdefault((p.origin + j, t), []).append(m)
    for ms in by_hop.values():
        add_row({m: 1 for m, _ in ms}, 1, 1)
    for ms in by_slot.values():
        if len(ms) > 1:
            add_row({m: 1 for m in ms}, -np.inf, 1)
    for n, p in enumerate(instance.packets):
        for j in range(p.length - 1):
            # time(j+1) - time(j) >= 1
            coefs = {m: t for m, t in by_hop[(n, j + 1)]}
            for m, t in by_hop[(n, j)]:
                coefs[m] = coefs.get(m, 0) - t
            add_row(coefs, 1, np.inf)
        # time(last) + 1 - release <= F
        coefs = {m: t for m, t in by_hop[(n, p.length - 1)]}
        coefs[F] = -1
        add_row(coefs, -np.inf, p.release - 1)
    A = lil_matrix((len(rows), nx + 1))
    for r, coefs in enumerate(rows):
        for m, v in coefs.items():
            A[r, m] = v
    c = np.zeros(nx + 1)
    c[F] = 1
    integrality = np.ones(nx + 1)
    bounds = Bounds(np.zeros(nx + 1), np.r_[np.ones(nx), upper])
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo_b, hi_b), integrality=integrality, bounds=bounds)
    if not res.success:
        raise RuntimeError(res.message)
    return int(round(res.fun))

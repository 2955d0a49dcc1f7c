# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled simulation kernel. Same contract as ``_pykernel.simulate_ranked``."""
import numpy as np

from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue
from libcpp.vector cimport vector

ctypedef pair[long long, long long] entry


def simulate_ranked(release, origin, length, offset, rank, long long k, long long horizon):
    cdef const long long[:] rel = np.ascontiguousarray(release, dtype=np.int64)
    cdef const long long[:] org = np.ascontiguousarray(origin, dtype=np.int64)
    cdef const long long[:] lng = np.ascontiguousarray(length, dtype=np.int64)
    cdef const long long[:] off = np.ascontiguousarray(offset, dtype=np.int64)
    cdef const long long[:] rnk = np.ascontiguousarray(rank, dtype=np.int64)
    cdef Py_ssize_t n = rel.shape[0]
    cdef const long long[:] order = np.argsort(np.asarray(rel), kind="stable").astype(np.int64)

    cdef long long total = 0
    cdef Py_ssize_t i
    for i in range(n):
        total += lng[i]
    out_t_arr = np.empty(total, dtype=np.int64)
    out_r_arr = np.empty(total, dtype=np.int64)
    out_i_arr = np.empty(total, dtype=np.int64)
    cdef long long[:] out_t = out_t_arr
    cdef long long[:] out_r = out_r_arr
    cdef long long[:] out_i = out_i_arr

    # max-heaps, so ranks are pushed negated
    cdef vector[priority_queue[entry]] heaps
    heaps.resize(k + 2)
    cdef vector[char] flag
    flag.resize(k + 2, 0)
    cdef vector[long long] hop
    hop.resize(n, 0)
    cdef vector[long long] active, next_active, pend, next_pend
    cdef long long t = 0, done = 0, m = 0, r, idx
    cdef Py_ssize_t ptr = 0, a

    while done < n:
        if active.empty() and pend.empty():
            if rel[order[ptr]] > t:
                t = rel[order[ptr]]
        if t > horizon:
            break
        for a in range(<Py_ssize_t>pend.size()):
            idx = pend[a]
            r = org[idx] + hop[idx]
            heaps[r].push(entry(-rnk[off[idx] + hop[idx]], idx))
            if not flag[r]:
                flag[r] = 1
                active.push_back(r)
        pend.clear()
        while ptr < n and rel[order[ptr]] <= t:
            idx = order[ptr]
            r = org[idx]
            heaps[r].push(entry(-rnk[off[idx]], idx))
            if not flag[r]:
                flag[r] = 1
                active.push_back(r)
            ptr += 1
        next_active.clear()
        for a in range(<Py_ssize_t>active.size()):
            r = active[a]
            idx = heaps[r].top().second
            heaps[r].pop()
            if heaps[r].empty():
                flag[r] = 0
            else:
                next_active.push_back(r)
            out_t[m] = t
            out_r[m] = r
            out_i[m] = idx
            m += 1
            hop[idx] += 1
            if hop[idx] == lng[idx]:
                done += 1
            else:
                pend.push_back(idx)
        active.swap(next_active)
        t += 1
    return out_t_arr[:m], out_r_arr[:m], out_i_arr[:m], done

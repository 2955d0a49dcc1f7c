"""Compiled vs pure-Python simulation kernel.

    python benchmarks/bench_engine.py [--repeat 3] [--quick]

Both kernels run the same ranked hop table; traces are compared for
equality before any timing is reported.
"""
from __future__ import annotations

import argparse
import random
import statistics
import time

from pktline import _pykernel
from pktline.engine import BACKEND, _ckernel, hop_ranks, simulate
from pktline.generators import adversary_43, gen_greedy_family, random_instance
from pktline.policies import BUILTINS, GREEDY


def cases(quick: bool):
    sizes = [(4, 64), (6, 128)] if quick else [(4, 64), (6, 128), (6, 512), (8, 128)]
    for k, h in sizes:
        yield f"greedy-lb k={k} h={h}", gen_greedy_family(k, h)[0]
    rng = random.Random(7)
    yield "random k=16 n=20000", random_instance(rng, 16, 20000, lengths=(1, 2, 4, 8), max_release=20000)
    if not quick:
        yield "adv-43 stages=5 ell=16", adversary_43(GREEDY, 5, 16).instance


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    if BACKEND != "compiled":
        raise SystemExit("compiled kernel not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'case':<28}{'hops':>10}{'python s':>11}{'compiled s':>12}{'speedup':>9}{'kernel only':>13}")
    speedups = []
    kernel_speedups = []
    for label, inst in cases(args.quick):
        for pol in BUILTINS.values():
            a = simulate(inst, pol, backend="python")
            b = simulate(inst, pol, backend="compiled")
            if a != b:
                raise SystemExit(f"kernels disagree on {label} / {pol.name}")
        hops = sum(p.length for p in inst.packets)
        py = best_of(lambda: simulate(inst, GREEDY, backend="python"), args.repeat)
        cc = best_of(lambda: simulate(inst, GREEDY, backend="compiled"), args.repeat)
        arrays = hop_ranks(inst, GREEDY)
        horizon = inst.default_horizon()
        kpy = best_of(lambda: _pykernel.simulate_ranked(*arrays, inst.k, horizon), args.repeat)
        kcc = best_of(lambda: _ckernel.simulate_ranked(*arrays, inst.k, horizon), args.repeat)
        speedups.append(py / cc)
        kernel_speedups.append(kpy / kcc)
        print(f"{label:<28}{hops:>10}{py:>11.3f}{cc:>12.3f}{py / cc:>8.1f}x{kpy / kcc:>12.1f}x")
    print(f"median speedup {statistics.median(speedups):.1f}x end-to-end, "
          f"{statistics.median(kernel_speedups):.1f}x kernel only (greedy)")


if __name__ == "__main__":
    main()

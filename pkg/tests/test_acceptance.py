"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary. Tolerances are pinned below and never loosened to make a
criterion pass. ``python tests/test_acceptance.py`` prints the same lines.
"""
from __future__ import annotations

import itertools
import random
import time
from fractions import Fraction

import pytest

from pktline.analysis import check_lemma1, check_lemma2, check_lemma3, check_theorem2, delta_profile
from pktline.core import block_flows, flow_times
from pktline.engine import is_zealous, replay_mismatches, simulate, validate_trace
from pktline.generators import (
    adversary_43,
    adversary_65,
    gen_greedy_family,
    gen_prop_k2,
    gen_warmup_65,
    random_block_instance,
    random_family_like,
    random_instance,
)
from pktline.offline import (
    brute_force_opt,
    canonical_prefs,
    exhaustive_opt,
    load_lower_bound,
    reference_schedule,
)
from pktline.policies import BUILTINS, EARLIEST_ARRIVAL, FURTHEST_TO_GO, GREEDY, BlockPreference, block_policy

GRID = list(itertools.product((2, 3, 4, 5, 6), (2, 4, 16)))

# pinned thresholds
C1_RUNTIME_S = 5.0
C3_K4_MIN = 1.855
C3_K2_MIN = 1.49
C3_RUNTIME_S = 10.0
C5_MIN_INSTANCES = 1000
C6_MIN_INSTANCES = 500
C6_RUNTIME_S = 300.0
C7_MIN_RATIO = Fraction(119, 100)
C8_MIN_RATIO = Fraction(128, 100)
C8_RUNTIME_S = 300.0
C9_MIN_INSTANCES = 200

RESULTS: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# sandwich bookkeeping shared by criteria 4, 6 and 9: (instance, opt, family)
# where ``family`` marks instances built by a named generator, the only ones
# whose block labels carry a reference construction
SOLVED: list = []


def _note_solved(inst, opt, family=False):
    SOLVED.append((inst, opt, family))


def greedy_formulas(k, h):
    f = {"A1": 2 ** (k - 2) * h, "B1": 2 ** (k - 1) * h - 1, f"B{k}": (2**k - 1) * h - 1}
    for i in range(2, k):
        f[f"A{i}"] = (2 ** (k - 1) - 2 ** (k - 1 - i)) * h + 1
        f[f"B{i}"] = (2**k - 2 ** (k - i)) * h
    return (2**k - 1) * h - 1, f


def opt_formulas(k, h):
    f = {"A1": 2 ** (k - 1) * h, "B1": 2 ** (k - 2) * h + 1, f"B{k}": 2 ** (k - 1) * h + 1}
    for i in range(2, k):
        f[f"A{i}"] = 2 ** (k - 1) * h + 3
        f[f"B{i}"] = (2 ** (k - 1) - 2 ** (k - 1 - i)) * h + 2
    return 2 ** (k - 1) * h + 3, f


def test_criterion_1_greedy_family_exact():
    t0 = time.perf_counter()
    bad = []
    for k, h in GRID:
        inst, _ = gen_greedy_family(k, h)
        flows, value = flow_times(inst, simulate(inst, GREEDY))
        want, blocks = greedy_formulas(k, h)
        if value != want or block_flows(inst, flows) != blocks:
            bad.append((k, h))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < C1_RUNTIME_S
    record("1", ok, f"cells={len(GRID)} mismatches={bad} runtime={elapsed:.2f}s (limit {C1_RUNTIME_S}s, tolerance 0)")


@pytest.mark.parametrize("k, h", GRID)
def test_criterion_2_reference_schedule_exact(k, h):
    inst, _ = gen_greedy_family(k, h)
    prefs = canonical_prefs(inst)
    tr = reference_schedule(inst, prefs)
    valid = validate_trace(inst, tr) == []
    consistent = is_zealous(inst, tr) and replay_mismatches(inst, tr, block_policy(prefs)) == []
    flows, value = flow_times(inst, tr)
    got = block_flows(inst, flows)
    want, blocks = opt_formulas(k, h)
    diff = {lab: (got.get(lab), v) for lab, v in blocks.items() if got.get(lab) != v}
    ok = valid and consistent and value == want and not diff
    record(
        f"2[k={k},h={h}]",
        ok,
        f"valid={valid} zealous-consistent={consistent} max={value} want={want} "
        f"block mismatches (got, want)={diff} (tolerance 0)",
    )


def _ratio(inst):
    g = flow_times(inst, simulate(inst, GREEDY))[1]
    r = flow_times(inst, reference_schedule(inst))[1]
    return g / r, g, r


def test_criterion_3_ratio_convergence():
    t0 = time.perf_counter()
    r4, g4, o4 = _ratio(gen_greedy_family(4, 512)[0])
    r2, g2, o2 = _ratio(gen_greedy_family(2, 512)[0])
    elapsed = time.perf_counter() - t0
    ok = r4 >= C3_K4_MIN and r2 >= C3_K2_MIN and elapsed < C3_RUNTIME_S
    record(
        "3",
        ok,
        f"k=4 h=512 ratio={r4:.4f} ({g4}/{o4}, min {C3_K4_MIN}); "
        f"k=2 h=512 ratio={r2:.4f} ({g2}/{o2}, min {C3_K2_MIN}); runtime={elapsed:.2f}s (limit {C3_RUNTIME_S}s)",
    )


def test_criterion_4_proposition_k2():
    inst = gen_prop_k2(4)
    g = flow_times(inst, simulate(inst, GREEDY))[1]
    r = flow_times(inst, reference_schedule(inst))[1]
    lb = load_lower_bound(inst)
    opt = brute_force_opt(inst)
    _note_solved(inst, opt, family=True)
    ok = (g, r, lb, opt.value, opt.exact) == (10, 8, 8, 8, True)
    record("4", ok, f"greedy={g} reference={r} load_lb={lb} brute={opt.value} exact={opt.exact} (want 10, 8, 8, 8 exact)")


def _corpus(n, seed, k_max, n_max):
    """Uniform, bursty and family-shaped draws in rotation; the last kind
    is where Greedy actually trails the optimum."""
    rng = random.Random(seed)
    for m in range(n):
        k = rng.randint(1, k_max)
        size = rng.randint(1, n_max)
        kind = m % 3
        if kind == 0:
            yield random_instance(rng, k, size, max_release=rng.randint(0, 2 * size))
        elif kind == 1:
            yield random_block_instance(rng, k, size, spread=rng.randint(1, 4))
        else:
            yield random_family_like(rng, max(k, 2), size, jitter=rng.randint(0, 1))


def test_criterion_5_lemma1_property():
    count = 0
    violations = []
    for inst in _corpus(C5_MIN_INSTANCES, 2024, 4, 15):
        g = simulate(inst, GREEDY)
        for pol in BUILTINS.values():
            ref = simulate(inst, pol)
            if not is_zealous(inst, ref) or not check_lemma1(delta_profile(inst, g, ref)):
                violations.append((count, pol.name))
        count += 1
    ok = count >= C5_MIN_INSTANCES and not violations
    record("5", ok, f"instances={count} (min {C5_MIN_INSTANCES}) references={len(BUILTINS)} violations={len(violations)}")


def test_criterion_6_lemma2_lemma3_theorem2():
    t0 = time.perf_counter()
    count = inexact = 0
    l2 = l3 = t2 = 0
    separated = 0
    for inst in _corpus(C6_MIN_INSTANCES, 77, 3, 10):
        opt = brute_force_opt(inst)
        _note_solved(inst, opt)
        count += 1
        if not opt.exact:
            inexact += 1
            continue
        g = simulate(inst, GREEDY)
        gv = flow_times(inst, g)[1]
        separated += gv > opt.value
        prof = delta_profile(inst, g, opt.trace)
        l2 += bool(check_lemma2(inst, prof, opt.trace))
        l3 += not check_lemma3(prof, opt.value)
        t2 += not check_theorem2(inst, gv, opt.value, inst.k)
    elapsed = time.perf_counter() - t0
    ok = count - inexact >= C6_MIN_INSTANCES and not (l2 or l3 or t2) and elapsed < C6_RUNTIME_S
    record(
        "6",
        ok,
        f"exact instances={count - inexact} (min {C6_MIN_INSTANCES}) lemma2 violations={l2} "
        f"lemma3 failures={l3} theorem2 failures={t2} greedy>opt on {separated} "
        f"runtime={elapsed:.1f}s (limit {C6_RUNTIME_S:.0f}s)",
    )


def test_criterion_7_adversary_65():
    h = 500
    parts = []
    ok = True
    for pol in (GREEDY, EARLIEST_ARRIVAL, FURTHEST_TO_GO):
        res = adversary_65(pol, h)
        certified = validate_trace(res.instance, res.offline_trace) == [] and (
            flow_times(res.instance, res.offline_trace)[1] == res.offline_value
        )
        ok &= certified and res.ratio >= C7_MIN_RATIO
        if pol is GREEDY:
            ok &= (res.policy_value, res.offline_value) == (2000, 1500) and res.ratio == Fraction(4, 3)
        parts.append(f"{pol.name}={float(res.ratio):.4f} ({res.policy_value}/{res.offline_value}, {res.branch}, certified={certified})")
    record("7", ok, f"h={h} " + " ".join(parts) + f" (min {float(C7_MIN_RATIO)}; greedy exactly 2000/1500)")


def test_criterion_8_adversary_43():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for pol in BUILTINS.values():
        res = adversary_43(pol, 6, 32)
        certified = validate_trace(res.instance, res.offline_trace) == []
        log = res.stage_log
        recursion = all(b.L >= a.L + Fraction(a.U, 6) - a.slack for a, b in zip(log, log[1:]))
        ok &= certified and recursion and res.ratio >= C8_MIN_RATIO
        parts.append(
            f"{pol.name}={float(res.ratio):.4f} ({res.policy_value}/{res.offline_value}, {res.branch}, "
            f"stages logged={len(log)}, recursion={recursion})"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < C8_RUNTIME_S
    record("8", ok, " ".join(parts) + f" (min {float(C8_MIN_RATIO)}) runtime={elapsed:.1f}s (limit {C8_RUNTIME_S:.0f}s)")


def _sandwich_ok(inst, opt, family) -> bool:
    g = flow_times(inst, simulate(inst, GREEDY))[1]
    chain = [load_lower_bound(inst), opt.value]
    if family:
        chain.append(flow_times(inst, reference_schedule(inst))[1])
    chain.append(g)
    return opt.exact and chain == sorted(chain)


FAMILY_SOLVES = (
    [gen_greedy_family(2, h)[0] for h in range(2, 7)]
    + [gen_greedy_family(3, h)[0] for h in (2, 3, 4)]
    + [gen_greedy_family(4, 2)[0]]
    + [gen_prop_k2(h) for h in (4, 5, 6)]
    + [gen_warmup_65(h, jam) for h in (1, 2, 3) for jam in (False, True)]
)


def test_criterion_9_offline_soundness():
    mismatches = 0
    count = 0
    for inst in _corpus(C9_MIN_INSTANCES, 99, 3, 6):
        opt = brute_force_opt(inst)
        _note_solved(inst, opt)
        count += 1
        mismatches += opt.value != exhaustive_opt(inst)[0]
    for inst in FAMILY_SOLVES:
        _note_solved(inst, brute_force_opt(inst), family=True)
    with_ref = sum(family for _, _, family in SOLVED)
    broken = sum(not _sandwich_ok(*entry) for entry in SOLVED)
    ok = count >= C9_MIN_INSTANCES and not mismatches and not broken
    record(
        "9",
        ok,
        f"tiny instances={count} (min {C9_MIN_INSTANCES}) brute!=exhaustive on {mismatches}; "
        f"sandwich checked on {len(SOLVED)} solved instances ({with_ref} with a reference), broken={broken}",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))

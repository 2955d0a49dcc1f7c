"""Online-versus-reference backlog profiles and checkers for the Greedy bounds.

``a[i][t]`` (reference) and ``g[i][t]`` (online) count packets alive at
``t`` that have not yet been processed on router ``i`` although they need
it. Row 0 is padding so that rows are indexed by router number.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import Instance, Trace, flow_times
from .engine import check_trace, simulate
from .offline import OptResult, load_lower_bound
from .policies import Policy


@dataclass(frozen=True)
class DeltaProfile:
    a: np.ndarray
    g: np.ndarray
    delta: np.ndarray
    horizon: int

    @property
    def k(self) -> int:
        return self.delta.shape[0] - 1


def needing_counts(instance: Instance, trace: Trace, width: int) -> np.ndarray:
    diff = np.zeros((instance.k + 1, width + 1), dtype=np.int64)
    hops = trace.hops
    for p in instance.packets:
        for t, r in hops[p.id]:
            # alive and still owing router r on [release, t]
            diff[r, p.release] += 1
            diff[r, t + 1] -= 1
    return np.cumsum(diff, axis=1)[:, :width]


def delta_profile(instance: Instance, online: Trace, reference: Trace) -> DeltaProfile:
    check_trace(instance, online)
    check_trace(instance, reference)
    horizon = max(online.horizon, reference.horizon) + 1
    width = horizon + 1
    g = needing_counts(instance, online, width)
    a = needing_counts(instance, reference, width)
    return DeltaProfile(a, g, g - a, horizon)


def check_lemma1(profile: DeltaProfile) -> bool:
    return not profile.delta[1].any()


class LengthError(ValueError):
    pass


def _require_short(instance: Instance) -> None:
    bad = [p.id for p in instance.packets if p.length not in (1, 2)]
    if bad:
        raise LengthError(f"checker needs lengths in {{1, 2}}; packets {bad[:10]} are longer")


def check_lemma2(instance: Instance, profile: DeltaProfile, reference: Trace) -> list[tuple[int, int, int, int]]:
    """Counterexamples ``(router, t, needed, found)``; empty when the lemma holds.

    Whenever ``delta[i][t+1] = delta[i][t] + 1 > delta[i-1][t] >= 0`` the
    reference must, at ``t``, still owe router ``i-1`` at least
    ``delta[i][t+1] - delta[i-1][t]`` packets of priority at least
    ``delta[i][t+1] + 1``.
    """
    _require_short(instance)
    d = profile.delta
    hops = reference.hops
    out = []
    for i in range(2, profile.k + 1):
        rising = np.nonzero((d[i, 1:] == d[i, :-1] + 1) & (d[i, 1:] > d[i - 1, :-1]) & (d[i - 1, :-1] >= 0))[0]
        if not len(rising):
            continue
        owing = []
        for p in instance.packets:
            if p.origin <= i - 1 <= p.last_router:
                steps = hops[p.id]
                owing.append((p, [s for s, _ in steps], steps[i - 1 - p.origin][0]))
        for t in map(int, rising):
            target = int(d[i, t + 1])
            needed = target - int(d[i - 1, t])
            found = 0
            for p, steps, on_prev in owing:
                if p.release <= t <= on_prev:
                    remaining = p.length - sum(1 for s in steps if s < t)
                    if t - p.release + remaining >= target + 1:
                        found += 1
            if found < needed:
                out.append((i, t, needed, found))
    return out


def lemma3_bound(router: int, opt_value: int) -> Fraction:
    return (1 - Fraction(1, 2 ** (router - 1))) * opt_value


def check_lemma3(profile: DeltaProfile, opt_value: int) -> bool:
    """max over t and j <= i of delta[j][t] <= (1 - 2^(1-i)) * opt, for every i."""
    running = None
    for i in range(1, profile.k + 1):
        row = int(profile.delta[i].max())
        running = row if running is None else max(running, row)
        if running > lemma3_bound(i, opt_value):
            return False
    return True


def check_theorem2(instance: Instance, greedy_value: int, opt_value: int, k: int) -> bool:
    _require_short(instance)
    return greedy_value <= (2 - Fraction(2, 2**k)) * opt_value + 3


@dataclass(frozen=True)
class RatioRow:
    policy: str
    max_flow: int
    ratio: Fraction


@dataclass(frozen=True)
class RatioReport:
    rows: tuple[RatioRow, ...]
    certificate: int
    exact: bool
    lower_bound: int

    HEADER = ("policy", "max_flow", "ratio")

    def to_text(self) -> str:
        lines = [f"certificate {self.certificate} exact={'yes' if self.exact else 'no'} load_lb {self.lower_bound}"]
        lines.append(f"{'policy':<24}{'max_flow':>10}{'ratio':>10}")
        for r in self.rows:
            lines.append(f"{r.policy:<24}{r.max_flow:>10}{float(r.ratio):>10.4f}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["\t".join(self.HEADER)]
        for r in self.rows:
            lines.append(f"{r.policy}\t{r.max_flow}\t{float(r.ratio):.6f}")
        return "\n".join(lines) + "\n"


def ratio_report(instance: Instance, policies: Sequence[Policy], cert: OptResult) -> RatioReport:
    rows = []
    for pol in policies:
        _, value = flow_times(instance, simulate(instance, pol))
        ratio = Fraction(value, cert.value) if cert.value else Fraction(1)
        rows.append(RatioRow(pol.name, value, ratio))
    return RatioReport(tuple(rows), cert.value, cert.exact, load_lower_bound(instance))


def lemma3_status(profile: DeltaProfile, opt: Optional[OptResult]) -> str:
    """"pass"/"fail", or "not evaluable" unless the optimum is exact."""
    if opt is None or not opt.exact:
        return "not evaluable"
    return "pass" if check_lemma3(profile, opt.value) else "fail"

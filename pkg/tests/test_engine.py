import pytest
from hypothesis import given

from strategies import instances
from pktline import engine
from pktline.core import Instance, InvalidTraceError, Packet, Trace, flow_times
from pktline.engine import (
    SimulationError,
    PolicyError,
    check_trace,
    is_zealous,
    replay_mismatches,
    simulate,
    validate_trace,
)
from pktline.generators import gen_greedy_family, gen_prop_k2
from pktline.offline import reference_schedule
from pktline.policies import BUILTINS, GREEDY, Policy, from_select

compiled = pytest.mark.skipif(engine.BACKEND != "compiled", reason="compiled kernel not built")


def _views_only(pol: Policy) -> Policy:
    """Same choices, but forced through the LocalView path."""
    return from_select(pol.name + "/views", pol.select)


def _rules(violations):
    return {v.rule for v in violations}


class TestSimulate:
    def test_empty(self):
        assert simulate(Instance(3), GREEDY) == Trace()

    def test_greedy_family_value(self):
        inst, _ = gen_greedy_family(4, 4)
        assert flow_times(inst, simulate(inst, GREEDY))[1] == 59

    def test_prop_k2_value(self):
        inst = gen_prop_k2(4)
        assert flow_times(inst, simulate(inst, GREEDY))[1] == 10

    def test_one_step_transfer(self):
        inst = Instance(3, (Packet(0, 5, 1, 3),))
        assert simulate(inst, GREEDY).assignments == ((5, 1, 0), (6, 2, 0), (7, 3, 0))

    def test_release_visible_same_step(self):
        inst = Instance(1, (Packet(0, 0, 1, 1), Packet(1, 1, 1, 1)))
        assert simulate(inst, GREEDY).assignments == ((0, 1, 0), (1, 1, 1))

    def test_idle_gap_jumps(self):
        inst = Instance(1, (Packet(0, 0, 1, 1), Packet(1, 1000, 1, 1)))
        assert simulate(inst, GREEDY).assignments == ((0, 1, 0), (1000, 1, 1))

    def test_horizon_error_names_stuck(self):
        inst = Instance(1, tuple(Packet(i, 0, 1, 1) for i in range(5)))
        with pytest.raises(SimulationError) as ei:
            simulate(inst, GREEDY, horizon=2)
        assert ei.value.stuck == [3, 4]

    def test_horizon_error_views_path(self):
        inst = Instance(1, tuple(Packet(i, 0, 1, 1) for i in range(5)))
        with pytest.raises(SimulationError):
            simulate(inst, _views_only(GREEDY), horizon=1)

    def test_policy_must_pick_queued(self):
        bad = from_select("bad", lambda view: -7)
        with pytest.raises(PolicyError):
            simulate(Instance(1, (Packet(0, 0, 1, 1),)), bad)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            simulate(Instance(1, (Packet(0, 0, 1, 1),)), GREEDY, backend="gpu")

    @given(instances(max_k=5, max_n=14, lengths=(1, 2, 3)))
    def test_valid_complete_zealous(self, inst):
        for pol in BUILTINS.values():
            tr = simulate(inst, pol)
            assert validate_trace(inst, tr) == []
            assert len(tr) == sum(p.length for p in inst.packets)
            assert is_zealous(inst, tr)

    @given(instances(max_k=4, max_n=12, lengths=(1, 2, 3), labeled=True))
    def test_fast_path_matches_views(self, inst):
        for pol in BUILTINS.values():
            assert simulate(inst, pol) == simulate(inst, _views_only(pol))

    @given(instances(max_k=4, max_n=12, lengths=(1, 2, 3)))
    def test_router_order_irrelevant(self, inst):
        # the views path visits routers in ascending order; a reversed copy of
        # the same loop must produce the same trace
        for pol in BUILTINS.values():
            assert _simulate_reversed(inst, pol) == simulate(inst, pol, backend="python")

    @given(instances(max_k=4, max_n=12))
    def test_deterministic(self, inst):
        assert simulate(inst, GREEDY) == simulate(inst, GREEDY)

    @compiled
    @given(instances(max_k=6, max_n=20, lengths=(1, 2, 3, 4), max_release=30, labeled=True))
    def test_backends_agree(self, inst):
        for pol in BUILTINS.values():
            assert simulate(inst, pol, backend="python") == simulate(inst, pol, backend="compiled")

    @compiled
    def test_backends_agree_large(self):
        inst, _ = gen_greedy_family(5, 16)
        assert simulate(inst, GREEDY, backend="python") == simulate(inst, GREEDY, backend="compiled")


def _simulate_reversed(inst, pol):
    from pktline.core import LocalView, PacketState, QueueEntry

    states = {p.id: PacketState.fresh(p) for p in inst.packets}
    out = []
    t = 0
    while any(s.remaining for s in states.values()):
        chosen = []
        for r in range(inst.k, 0, -1):
            queue = tuple(
                QueueEntry(s.packet.id, s.packet.release, s.packet.length, s.remaining, s.packet.block)
                for s in states.values()
                if s.remaining and s.location == r and s.available <= t
            )
            if queue:
                chosen.append((r, pol.select(LocalView(r, t, queue))))
        for r, pid in chosen:
            states[pid].advance(t)
            out.append((t, r, pid))
        t += 1
    return Trace(tuple(out))


class TestValidate:
    inst = Instance(2, (Packet(0, 1, 1, 2), Packet(1, 0, 1, 1)))

    def test_ok(self):
        tr = Trace(((0, 1, 1), (1, 1, 0), (2, 2, 0)))
        assert validate_trace(self.inst, tr) == []
        check_trace(self.inst, tr)

    def test_before_release(self):
        tr = Trace(((0, 1, 0), (1, 2, 0), (1, 1, 1)))
        assert "processed before release" in _rules(validate_trace(self.inst, tr))

    def test_capacity(self):
        tr = Trace(((1, 1, 0), (1, 1, 1), (2, 2, 0)))
        bad = validate_trace(self.inst, tr)
        assert "router capacity" in _rules(bad)
        assert all(isinstance(v.packet, int) and v.rule for v in bad)

    def test_transfer_gap(self):
        tr = Trace(((1, 1, 0), (1, 2, 0), (0, 1, 1)))
        assert "transfer gap" in _rules(validate_trace(self.inst, tr))

    def test_hop_order(self):
        tr = Trace(((1, 2, 0), (2, 1, 0), (0, 1, 1)))
        assert any(r.startswith("hop order") for r in _rules(validate_trace(self.inst, tr)))

    def test_hop_count(self):
        tr = Trace(((1, 1, 0), (0, 1, 1)))
        assert any(r.startswith("hop count") for r in _rules(validate_trace(self.inst, tr)))

    def test_unknown_and_range(self):
        tr = Trace(((0, 1, 1), (1, 1, 0), (2, 2, 0), (3, 3, 9)))
        rules = _rules(validate_trace(self.inst, tr))
        assert {"unknown packet", "router out of range"} <= rules

    def test_check_trace_raises(self):
        with pytest.raises(InvalidTraceError):
            check_trace(self.inst, Trace())

    def test_reference_family(self):
        inst, _ = gen_greedy_family(4, 4)
        assert validate_trace(inst, reference_schedule(inst)) == []


class TestZealous:
    def test_empty(self):
        assert is_zealous(Instance(1), Trace())

    def test_idle_detected(self):
        inst = Instance(1, (Packet(0, 0, 1, 1),))
        assert not is_zealous(inst, Trace(((1, 1, 0),)))
        assert is_zealous(inst, Trace(((0, 1, 0),)))

    def test_invalid_propagates(self):
        with pytest.raises(InvalidTraceError):
            is_zealous(Instance(1, (Packet(0, 0, 1, 1),)), Trace())

    def test_replay_mismatch(self):
        inst = Instance(1, (Packet(0, 0, 1, 1), Packet(1, 0, 1, 1)))
        assert replay_mismatches(inst, simulate(inst, GREEDY), GREEDY) == []
        swapped = Trace(((0, 1, 1), (1, 1, 0)))
        assert replay_mismatches(inst, swapped, GREEDY) == [(0, 1, 1, 0)]
        idle = Trace(((1, 1, 0), (2, 1, 1)))
        assert (0, 1, -1, 0) in replay_mismatches(inst, idle, GREEDY)


def test_pure_fallback_selected_at_import():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PKTLINE_PURE="1")
    code = "from pktline import engine; print(engine.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

"""Instance JSON and trace JSONL files.

Both writers are deterministic: sorted keys, fixed separators, one trailing
newline. Readers reject unknown fields instead of ignoring them.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .core import Instance, InstanceError, Packet, Trace

PathLike = Union[str, Path]

_INSTANCE_KEYS = {"k", "packets"}
_PACKET_KEYS = {"id", "release", "origin", "length", "block"}
_REQUIRED_PACKET_KEYS = _PACKET_KEYS - {"block"}
_TRACE_KEYS = {"t", "router", "packet"}


class FormatError(ValueError):
    """A file does not match the instance or trace schema."""


def _int_field(obj: dict, key: str, where: str) -> int:
    v = obj[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise FormatError(f"{where}: field {key!r} must be an integer, got {v!r}")
    return v


def instance_to_dict(instance: Instance) -> dict:
    packets = []
    for p in instance.packets:
        d = {"id": p.id, "release": p.release, "origin": p.origin, "length": p.length}
        if p.block is not None:
            d["block"] = p.block
        packets.append(d)
    return {"k": instance.k, "packets": packets}


def instance_from_dict(data: object) -> Instance:
    if not isinstance(data, dict):
        raise FormatError("instance must be a JSON object")
    extra = set(data) - _INSTANCE_KEYS
    if extra:
        raise FormatError(f"unknown instance fields {sorted(extra)}")
    if "k" not in data:
        raise FormatError("instance is missing 'k'")
    k = _int_field(data, "k", "instance")
    raw = data.get("packets", [])
    if not isinstance(raw, list):
        raise FormatError("'packets' must be a list")
    packets = []
    for n, rec in enumerate(raw):
        where = f"packet #{n}"
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: must be an object")
        extra = set(rec) - _PACKET_KEYS
        if extra:
            raise FormatError(f"{where}: unknown fields {sorted(extra)}")
        missing = _REQUIRED_PACKET_KEYS - set(rec)
        if missing:
            raise FormatError(f"{where}: missing fields {sorted(missing)}")
        block = rec.get("block")
        if block is not None and not isinstance(block, str):
            raise FormatError(f"{where}: 'block' must be a string")
        packets.append(
            Packet(
                _int_field(rec, "id", where),
                _int_field(rec, "release", where),
                _int_field(rec, "origin", where),
                _int_field(rec, "length", where),
                block,
            )
        )
    try:
        return Instance(k, tuple(packets))
    except InstanceError as e:
        raise FormatError(str(e)) from e


def dumps_instance(instance: Instance) -> str:
    d = instance_to_dict(instance)
    # one packet per line keeps diffs and large files readable
    body = ",\n".join("  " + json.dumps(p, sort_keys=True, separators=(", ", ": ")) for p in d["packets"])
    packets = "[\n" + body + "\n]" if body else "[]"
    return '{"k": %d,\n"packets": %s}\n' % (d["k"], packets)


def loads_instance(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e}") from e
    return instance_from_dict(data)


def write_instance(path: PathLike, instance: Instance) -> None:
    Path(path).write_text(dumps_instance(instance), encoding="utf-8")


def read_instance(path: PathLike) -> Instance:
    return loads_instance(Path(path).read_text(encoding="utf-8"))


def dumps_trace(trace: Trace) -> str:
    return "".join(
        json.dumps({"t": t, "router": r, "packet": p}, separators=(", ", ": ")) + "\n"
        for t, r, p in trace.assignments
    )


def loads_trace(text: str) -> Trace:
    """Parse JSONL records; order on disk is not trusted, the Trace sorts them."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{where}: invalid JSON: {e}") from e
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: record must be an object")
        if set(rec) != _TRACE_KEYS:
            raise FormatError(f"{where}: expected fields {sorted(_TRACE_KEYS)}, got {sorted(rec)}")
        out.append((_int_field(rec, "t", where), _int_field(rec, "router", where), _int_field(rec, "packet", where)))
    return Trace(tuple(out))


def write_trace(path: PathLike, trace: Trace) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8")


def read_trace(path: PathLike) -> Trace:
    return loads_trace(Path(path).read_text(encoding="utf-8"))

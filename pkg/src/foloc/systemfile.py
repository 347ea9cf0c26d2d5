"""JSON system description: state-space matrices, channels, topology, forcing.

See ``docs/system_schema.md`` for the format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measurements import Channel, MeasurementError, VOLTAGE_MAGNITUDE
from .modalsim import ForcedInput, LtiSystem, ModalError
from .topology import Topology, TopologyError


class SystemFileError(ValueError):
    pass


@dataclass(frozen=True)
class SystemDescription:
    system: LtiSystem
    channels: tuple
    forcing: ForcedInput | None
    topology: Topology | None = None
    duration_s: float = 10.0
    fs_hz: float = 60.0
    source_bus: int | None = None


def _matrix(doc, key, where):
    if key not in doc:
        raise SystemFileError(f"{where}: missing '{key}'")
    try:
        M = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise SystemFileError(f"{where}: '{key}' must be a nested array of numbers") from None
    if M.ndim != 2:
        raise SystemFileError(f"{where}: '{key}' must be a 2-D row-major array, got {M.ndim}-D")
    return M


def _omega(comp, where):
    if "omega_rad" in comp and "omega_hz" in comp:
        raise SystemFileError(f"{where}: give omega_rad or omega_hz, not both")
    if "omega_rad" in comp:
        return float(comp["omega_rad"])
    if "omega_hz" in comp:
        return 2 * math.pi * float(comp["omega_hz"])
    raise SystemFileError(f"{where}: forcing component needs omega_rad or omega_hz")


def _forcing(doc, where):
    entry = doc.get("forcing")
    if entry is None:
        return None
    if "input_index" not in entry:
        raise SystemFileError(f"{where}: forcing needs 'input_index'")
    comps = entry.get("components", [entry])
    out = []
    for c in comps:
        if "P" not in c:
            raise SystemFileError(f"{where}: forcing component needs amplitude 'P'")
        out.append((float(c["P"]), _omega(c, where), float(c.get("theta", 0.0))))
    try:
        return ForcedInput(int(entry["input_index"]), tuple(out))
    except ModalError as exc:
        raise SystemFileError(f"{where}: {exc}") from None


def parse_system(doc: dict, where: str = "<system>") -> SystemDescription:
    if not isinstance(doc, dict):
        raise SystemFileError(f"{where}: top level must be an object")
    A, B, C = (_matrix(doc, k, where) for k in ("A", "B", "C"))
    try:
        system = LtiSystem(A, B, C)
    except ModalError as exc:
        raise SystemFileError(f"{where}: {exc}") from None
    tokens = doc.get("channels")
    try:
        if tokens is None:
            channels = tuple(Channel(k + 1, VOLTAGE_MAGNITUDE) for k in range(system.n_outputs))
        else:
            channels = tuple(Channel.parse(t) for t in tokens)
    except MeasurementError as exc:
        raise SystemFileError(f"{where}: {exc}") from None
    if len(channels) != system.n_outputs:
        raise SystemFileError(f"{where}: {len(channels)} channels for {system.n_outputs} outputs")
    if len(set(channels)) != len(channels):
        raise SystemFileError(f"{where}: duplicate channel names")
    forcing = _forcing(doc, where)
    if forcing is not None and not 0 <= forcing.input_index < system.n_inputs:
        raise SystemFileError(f"{where}: input_index {forcing.input_index} out of range")
    topo = None
    if "topology" in doc:
        try:
            topo = Topology.from_dict(doc["topology"])
        except (TopologyError, TypeError, ValueError) as exc:
            raise SystemFileError(f"{where}: bad topology: {exc}") from None
    sim = doc.get("simulation", {})
    return SystemDescription(
        system=system, channels=channels, forcing=forcing, topology=topo,
        duration_s=float(sim.get("duration_s", 10.0)), fs_hz=float(sim.get("fs_hz", 60.0)),
        source_bus=doc.get("source_bus"),
    )


def load_system(path) -> SystemDescription:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_system(doc, str(path))


def load_topology(path) -> Topology:
    """Topology from a bare ``{"buses", "lines"}`` file or a system file's ``topology``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if "topology" in doc:
        doc = doc["topology"]
    try:
        return Topology.from_dict(doc)
    except (TopologyError, TypeError, ValueError) as exc:
        raise SystemFileError(f"{path}: bad topology: {exc}") from None


def system_to_dict(desc: SystemDescription) -> dict:
    sys = desc.system
    doc = {
        "A": sys.A.tolist(),
        "B": sys.B.tolist(),
        "C": sys.C.tolist(),
        "channels": [str(ch) for ch in desc.channels],
    }
    if desc.forcing is not None:
        doc["forcing"] = {
            "input_index": desc.forcing.input_index,
            "components": [{"P": P, "omega_rad": w, "theta": th}
                           for P, w, th in desc.forcing.components],
        }
    if desc.topology is not None:
        doc["topology"] = desc.topology.to_dict()
    doc["simulation"] = {"duration_s": desc.duration_s, "fs_hz": desc.fs_hz}
    if desc.source_bus is not None:
        doc["source_bus"] = int(desc.source_bus)
    return doc

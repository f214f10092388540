"""Topology, anomaly and tabular file formats.

Topology files are JSON with sections ``nodes``, ``cables``, ``branches``,
``loads`` and ``ports``.  Loads, sources and cables are given as named
parametric models with parameters, or as frequency tables for admittances;
complex entries are [re, im] pairs, all quantities in SI base units.

Spectra and traces are CSV with columns f_or_t, entry_row, entry_col, re, im
(im is 0 for traces); peak files carry time_s, distance_m, amplitude, entry.
Every writer takes ``timestamp=False`` to produce byte-stable output.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .anomalies import Anomaly, DistributedFault, LoadChange, LumpedFault
from .cables import constant_rlgc_cable, powerline_cable
from .errors import ParseError
from .mtl import CableSpec, FrequencyGrid, MatrixSpectrum
from .network import (AdmittanceSpec, Branch, NetworkTopology, Port,
                      constant_admittance, open_circuit, parallel_rc_admittance,
                      table_admittance)
from .timedomain import LocatedPeak, TimeTrace

__all__ = [
    "read_topology",
    "write_topology",
    "topology_to_dict",
    "topology_from_dict",
    "read_anomaly",
    "anomaly_to_dict",
    "read_cable_library",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_trace_csv",
    "write_peaks_csv",
]


def _fail(context: str, message: str) -> ParseError:
    return ParseError(f"{context}: {message}")


def _complex_from(pair, context: str) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    if (isinstance(pair, (list, tuple)) and len(pair) == 2
            and all(isinstance(v, (int, float)) for v in pair)):
        return complex(pair[0], pair[1])
    raise _fail(context, f"expected a number or [re, im] pair, got {pair!r}")


def _matrix_from(obj, n: int, context: str) -> np.ndarray:
    if isinstance(obj, (int, float)) or (
            isinstance(obj, (list, tuple)) and len(obj) == 2
            and all(isinstance(v, (int, float)) for v in obj)):
        return _complex_from(obj, context) * np.eye(n)
    try:
        rows = [[_complex_from(v, context) for v in row] for row in obj]
        mat = np.array(rows, dtype=complex)
    except (TypeError, ParseError) as exc:
        raise _fail(context, "expected a scalar, [re, im], or matrix of pairs") from exc
    if mat.shape != (n, n):
        raise _fail(context, f"matrix has shape {mat.shape}, expected {(n, n)}")
    return mat


# ---------------------------------------------------------------------------
# admittance and cable model registries

def admittance_from_dict(d: dict, n_conductors: int, context: str) -> AdmittanceSpec:
    if not isinstance(d, dict) or "model" not in d:
        raise _fail(context, "expected an object with a 'model' field")
    model = d["model"]
    params = d.get("params", {})
    try:
        if model == "constant":
            return constant_admittance(_matrix_from(params["y_s"], n_conductors,
                                                    f"{context}.y_s"), n_conductors)
        if model == "parallel_rc":
            return parallel_rc_admittance(float(params["r_ohm"]),
                                          float(params["c_farad"]), n_conductors)
        if model == "open":
            return open_circuit(n_conductors)
        if model == "table":
            f_hz = np.asarray(params["f_hz"], dtype=float)
            raw = params["y_s"]
            y = np.array([_matrix_from(entry, n_conductors, f"{context}.y_s[{k}]")
                          for k, entry in enumerate(raw)])
            return table_admittance(f_hz, y, n_conductors)
    except KeyError as exc:
        raise _fail(context, f"model {model!r} is missing parameter {exc}") from exc
    raise _fail(context, f"unknown admittance model {model!r}")


def admittance_to_dict(spec: AdmittanceSpec, context: str) -> dict:
    if spec.meta is None:
        raise _fail(context, "admittance has no serializable parametric form")
    return spec.meta


def cable_from_dict(d: dict, context: str) -> CableSpec:
    if not isinstance(d, dict) or "model" not in d:
        raise _fail(context, "expected an object with a 'model' field")
    model = d["model"]
    params = d.get("params", {})
    try:
        if model == "powerline":
            return powerline_cable(
                n_conductors=int(params.get("n_conductors", 1)),
                r0_ohm_per_m=float(params.get("r0_ohm_per_m", 0.1)),
                l_h_per_m=float(params.get("l_h_per_m", 5e-7)),
                c_f_per_m=float(params.get("c_f_per_m", 1e-10)),
                g_factor=float(params.get("g_factor", 5e-4)),
                coupling=float(params.get("coupling", 0.3)),
                f_ref_hz=float(params.get("f_ref_hz", 1e6)),
                label=d.get("label"))
        if model == "constant_rlgc":
            return constant_rlgc_cable(params["r"], params["l"], params["g"],
                                       params["c"],
                                       label=d.get("label", "constant-rlgc"))
    except KeyError as exc:
        raise _fail(context, f"model {model!r} is missing parameter {exc}") from exc
    raise _fail(context, f"unknown cable model {model!r}")


def cable_to_dict(cable: CableSpec, context: str) -> dict:
    if cable.meta is None:
        raise _fail(context, f"cable {cable.label!r} has no serializable parametric form")
    return dict(cable.meta, label=cable.label)


# ---------------------------------------------------------------------------
# topology files

def topology_from_dict(data: dict, context: str = "topology") -> NetworkTopology:
    for section in ("nodes", "cables", "branches"):
        if section not in data:
            raise _fail(context, f"missing section {section!r}")
    cables = {name: cable_from_dict(d, f"{context}.cables[{name!r}]")
              for name, d in data["cables"].items()}
    if not data["branches"]:
        raise _fail(context, "a network needs at least one branch")

    branches = []
    for k, bd in enumerate(data["branches"]):
        ctx = f"{context}.branches[{k}]"
        try:
            cable_name = bd["cable"]
            if cable_name not in cables:
                raise _fail(ctx, f"unknown cable {cable_name!r}")
            branches.append(Branch(id=str(bd["id"]), node_a=str(bd["node_a"]),
                                   node_b=str(bd["node_b"]),
                                   cable=cables[cable_name],
                                   length_m=float(bd["length_m"])))
        except KeyError as exc:
            raise _fail(ctx, f"missing field {exc}") from exc

    n = branches[0].cable.n_conductors
    loads = {str(node): admittance_from_dict(d, n, f"{context}.loads[{node!r}]")
             for node, d in data.get("loads", {}).items()}
    ports = {}
    for name, pd in data.get("ports", {}).items():
        ctx = f"{context}.ports[{name!r}]"
        try:
            ports[str(name)] = Port(
                node=str(pd["node"]),
                source=admittance_from_dict(pd["source"], n, f"{ctx}.source"))
        except KeyError as exc:
            raise _fail(ctx, f"missing field {exc}") from exc
    return NetworkTopology(nodes=tuple(str(x) for x in data["nodes"]),
                           branches=tuple(branches), loads=loads, ports=ports)


def topology_to_dict(net: NetworkTopology) -> dict:
    cables: dict[str, dict] = {}
    cable_names: dict[int, str] = {}
    for b in net.branches:
        if id(b.cable) not in cable_names:
            name = b.cable.label
            k = 2
            while name in cables:
                name = f"{b.cable.label}~{k}"
                k += 1
            cables[name] = cable_to_dict(b.cable, f"cables[{name!r}]")
            cable_names[id(b.cable)] = name
    return {
        "nodes": list(net.nodes),
        "cables": cables,
        "branches": [
            {"id": b.id, "node_a": b.node_a, "node_b": b.node_b,
             "cable": cable_names[id(b.cable)], "length_m": b.length_m}
            for b in net.branches],
        "loads": {node: admittance_to_dict(spec, f"loads[{node!r}]")
                  for node, spec in sorted(net.loads.items())},
        "ports": {name: {"node": p.node,
                         "source": admittance_to_dict(p.source,
                                                      f"ports[{name!r}].source")}
                  for name, p in sorted(net.ports.items())},
    }


def read_topology(path: str | Path) -> NetworkTopology:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return topology_from_dict(data, context=str(path))


def write_topology(net: NetworkTopology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(net), indent=2,
                                     sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# anomaly files

def read_anomaly(source: str | Path | dict, net: NetworkTopology) -> Anomaly:
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ParseError(f"{path}: no such file") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        context = str(path)
    else:
        data = source
        context = "anomaly"
    if not isinstance(data, dict) or "type" not in data:
        raise _fail(context, "expected an object with a 'type' field")
    kind = data["type"]
    n = net.n_conductors
    try:
        if kind == "lumped_fault":
            return LumpedFault(branch_id=str(data["branch"]),
                               offset_m=float(data["offset_m"]),
                               y_f=admittance_from_dict(data["y_f"], n,
                                                        f"{context}.y_f"),
                               active=bool(data.get("active", False)))
        if kind == "load_change":
            return LoadChange(node_id=str(data["node"]),
                              new_load=admittance_from_dict(data["load"], n,
                                                            f"{context}.load"))
        if kind == "distributed_fault":
            return DistributedFault(branch_id=str(data["branch"]),
                                    start_m=float(data["start_m"]),
                                    extent_m=float(data["extent_m"]),
                                    degraded=cable_from_dict(data["degraded"],
                                                             f"{context}.degraded"))
    except KeyError as exc:
        raise _fail(context, f"anomaly type {kind!r} is missing field {exc}") from exc
    raise _fail(context, f"unknown anomaly type {kind!r}")


def anomaly_to_dict(anomaly: Anomaly) -> dict:
    if isinstance(anomaly, LumpedFault):
        return {"type": "lumped_fault", "branch": anomaly.branch_id,
                "offset_m": anomaly.offset_m,
                "y_f": admittance_to_dict(anomaly.y_f, "y_f"),
                "active": anomaly.active}
    if isinstance(anomaly, LoadChange):
        return {"type": "load_change", "node": anomaly.node_id,
                "load": admittance_to_dict(anomaly.new_load, "load")}
    if isinstance(anomaly, DistributedFault):
        return {"type": "distributed_fault", "branch": anomaly.branch_id,
                "start_m": anomaly.start_m, "extent_m": anomaly.extent_m,
                "degraded": cable_to_dict(anomaly.degraded, "degraded")}
    raise ParseError(f"unknown anomaly type {type(anomaly).__name__}")


def read_cable_library(path: str | Path) -> dict[str, CableSpec]:
    """Named cable collection: {"name": {cable model dict}, ...}."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected an object of named cables")
    return {name: cable_from_dict(d, f"{path}:cables[{name!r}]")
            for name, d in data.items()}


# ---------------------------------------------------------------------------
# CSV emitters (spectra, traces, peaks)

def _header_lines(kind: str, timestamp: bool, extra: dict | None = None) -> list[str]:
    lines = [f"# kind={kind}"]
    if extra:
        for key, value in sorted(extra.items()):
            lines.append(f"# {key}={value}")
    if timestamp:
        lines.append(f"# written={datetime.now(timezone.utc).isoformat()}")
    return lines


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_spectrum_csv(path: str | Path, spec: MatrixSpectrum,
                       timestamp: bool = True) -> None:
    lines = _header_lines(spec.kind, timestamp)
    lines.append("f_or_t,entry_row,entry_col,re,im")
    f = spec.grid.frequencies
    L = spec.n_conductors
    for k in range(spec.grid.n_points):
        for r in range(L):
            for c in range(L):
                v = spec.values[k, r, c]
                lines.append(f"{_fmt(f[k])},{r},{c},{_fmt(v.real)},{_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path: str | Path) -> MatrixSpectrum:
    path = Path(path)
    kind = "admittance"
    rows = []
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# kind="):
                kind = line.split("=", 1)[1].strip()
            continue
        if line.startswith("f_or_t"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"{path}:{lineno}: expected 5 columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), int(parts[1]), int(parts[2]),
                         float(parts[3]), float(parts[4])))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    freqs = sorted({r[0] for r in rows})
    L = max(r[1] for r in rows) + 1
    if len(freqs) < 2:
        raise ParseError(f"{path}: need at least two frequency points")
    steps = np.diff(freqs)
    if np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
        raise ParseError(f"{path}: frequency column is not uniformly spaced")
    grid = FrequencyGrid(freqs[0], float(steps[0]), len(freqs))
    index = {f: k for k, f in enumerate(freqs)}
    values = np.zeros((len(freqs), L, L), dtype=complex)
    for fval, r, c, re, im in rows:
        values[index[fval], r, c] = complex(re, im)
    return MatrixSpectrum(grid, values, kind)


def write_trace_csv(path: str | Path, trace: TimeTrace,
                    timestamp: bool = True) -> None:
    extra = {"quantity": trace.origin.quantity}
    if trace.origin.model:
        extra["model"] = trace.origin.model
    lines = _header_lines("trace", timestamp, extra)
    lines.append("f_or_t,entry_row,entry_col,re,im")
    t = trace.times
    L = trace.n_conductors
    for k in range(trace.n_samples):
        for r in range(L):
            for c in range(L):
                lines.append(f"{_fmt(t[k])},{r},{c},"
                             f"{_fmt(trace.samples[k, r, c])},0")
    Path(path).write_text("\n".join(lines) + "\n")


def write_peaks_csv(path: str | Path, peaks: list[LocatedPeak],
                    timestamp: bool = True) -> None:
    lines = _header_lines("peaks", timestamp)
    lines.append("time_s,distance_m,amplitude,entry")
    for p in peaks:
        lines.append(f"{_fmt(p.time_s)},{_fmt(p.distance_m)},"
                     f"{_fmt(p.amplitude)},{p.entry[0]}:{p.entry[1]}")
    Path(path).write_text("\n".join(lines) + "\n")

"""Tree-topology network model and its reduction to port responses.

A network is a tree of nodes joined by cable branches.  Terminations and
sources are frequency-dependent admittance evaluators so constant, RLC and
tabulated models share one interface.  Junctions are ideal: voltages equal,
currents sum, no parasitics.

The reduction walks the tree from the leaves toward a port, replacing each
subtree by its equivalent admittance (carry-back).  The end-to-end transfer
function is the ordered product of per-segment voltage transfers along the
transmitter-receiver backbone, each segment terminated by the equivalent
admittance of everything beyond it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import SingularityError, UsageError, ValidationError
from .mtl import (CableSpec, FrequencyGrid, MatrixSpectrum, ctf_line,
                  echo_voltage, input_admittance_line, input_reflection,
                  input_reflection_modal, line_propagation_params,
                  load_reflection, modal_transform)

__all__ = [
    "AdmittanceSpec",
    "constant_admittance",
    "parallel_rc_admittance",
    "open_circuit",
    "conductance",
    "table_admittance",
    "Branch",
    "Port",
    "NetworkTopology",
    "ValidationReport",
    "validate_topology",
    "PortReduction",
    "reduce_to_port",
    "network_input_reflection",
    "end_to_end_ctf",
    "PortSignal",
    "port_signals",
    "TwoSectionResponse",
    "two_section_oracle",
    "tree_path",
    "node_distances",
    "farthest_node",
]


# ---------------------------------------------------------------------------
# admittance evaluators

@dataclass(frozen=True, eq=False)
class AdmittanceSpec:
    """Frequency-dependent L x L admittance used for loads, sources and
    shunt faults.  ``evaluate(f)`` maps (n_f,) -> (n_f, L, L) complex, S."""

    n_conductors: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    meta: dict | None = None

    def is_passive(self, f: np.ndarray, tol: float = 1e-9) -> bool:
        """True when every eigenvalue of Y(f) has non-negative real part."""
        vals = self.evaluate(f)
        eig = np.linalg.eigvals(vals)
        scale = float(np.max(np.abs(eig))) + 1e-300
        return bool(np.min(eig.real) >= -tol * scale)


def _as_matrix(y, n: int) -> np.ndarray:
    a = np.asarray(y, dtype=complex)
    if a.ndim == 0:
        return a * np.eye(n)
    if a.shape != (n, n):
        raise ValidationError(f"admittance matrix has shape {a.shape}, expected {(n, n)}")
    return a


def constant_admittance(y, n_conductors: int = 1, label: str = "") -> AdmittanceSpec:
    """Frequency-independent admittance.  A scalar y means y * identity."""
    mat = _as_matrix(y, n_conductors)

    def evaluate(f: np.ndarray) -> np.ndarray:
        return np.broadcast_to(mat, (f.size, n_conductors, n_conductors)).copy()

    meta = {"model": "constant", "params": {
        "y_s": [[[v.real, v.imag] for v in row] for row in mat]}}
    return AdmittanceSpec(n_conductors, evaluate, label or "constant", meta)


def parallel_rc_admittance(r_ohm: float, c_farad: float,
                           n_conductors: int = 1) -> AdmittanceSpec:
    """Per-conductor parallel RC to the reference: Y = (1/R + j 2 pi f C) I."""
    if r_ohm <= 0 or c_farad < 0:
        raise ValidationError("parallel RC load needs r_ohm > 0 and c_farad >= 0")
    n = n_conductors

    def evaluate(f: np.ndarray) -> np.ndarray:
        y = 1.0 / r_ohm + 1j * 2.0 * np.pi * f * c_farad
        return y[:, None, None] * np.eye(n)

    meta = {"model": "parallel_rc", "params": {"r_ohm": r_ohm, "c_farad": c_farad}}
    return AdmittanceSpec(n, evaluate, f"rc({r_ohm:g},{c_farad:g})", meta)


def open_circuit(n_conductors: int = 1) -> AdmittanceSpec:
    """Zero admittance (open termination)."""
    n = n_conductors

    def evaluate(f: np.ndarray) -> np.ndarray:
        return np.zeros((f.size, n, n), dtype=complex)

    return AdmittanceSpec(n, evaluate, "open", {"model": "open", "params": {}})


def conductance(g_siemens: float, n_conductors: int = 1) -> AdmittanceSpec:
    """Pure per-conductor conductance g * I; g = 0 is an invisible shunt."""
    return constant_admittance(complex(g_siemens), n_conductors,
                               label=f"g={g_siemens:g}S")


def table_admittance(f_hz, y_s, n_conductors: int = 1) -> AdmittanceSpec:
    """Tabulated admittance, linearly interpolated per entry.  ``y_s`` is
    (n_table,) for scalar-diagonal loads or (n_table, L, L)."""
    ft = np.asarray(f_hz, dtype=float)
    yt = np.asarray(y_s, dtype=complex)
    if ft.ndim != 1 or ft.size < 2 or np.any(np.diff(ft) <= 0):
        raise ValidationError("table frequencies must be increasing, length >= 2")
    n = n_conductors
    if yt.ndim == 1:
        yt = yt[:, None, None] * np.eye(n)
    if yt.shape != (ft.size, n, n):
        raise ValidationError("table values must have shape (n_table,) or (n_table, L, L)")

    def evaluate(f: np.ndarray) -> np.ndarray:
        out = np.empty((f.size, n, n), dtype=complex)
        for r in range(n):
            for c in range(n):
                out[:, r, c] = np.interp(f, ft, yt[:, r, c])
        return out

    meta = {"model": "table", "params": {
        "f_hz": ft.tolist(),
        "y_s": [[[ [yt[k, r, c].real, yt[k, r, c].imag] for c in range(n)]
                 for r in range(n)] for k in range(ft.size)]}}
    return AdmittanceSpec(n, evaluate, "table", meta)


# ---------------------------------------------------------------------------
# topology

@dataclass(frozen=True, eq=False)
class Branch:
    id: str
    node_a: str
    node_b: str
    cable: CableSpec
    length_m: float


@dataclass(frozen=True, eq=False)
class Port:
    node: str
    source: AdmittanceSpec  # admittance of the attached generator/modem


@dataclass(eq=False)
class NetworkTopology:
    """Immutable-by-convention tree network.  Use dataclasses.replace or the
    anomaly layer to derive modified copies."""

    nodes: tuple[str, ...]
    branches: tuple[Branch, ...]
    loads: dict[str, AdmittanceSpec]
    ports: dict[str, Port]

    @property
    def n_conductors(self) -> int:
        if not self.branches:
            raise ValidationError("network has no branches")
        return self.branches[0].cable.n_conductors

    def adjacency(self) -> dict[str, list[tuple[Branch, str]]]:
        adj: dict[str, list[tuple[Branch, str]]] = {n: [] for n in self.nodes}
        for b in self.branches:
            adj[b.node_a].append((b, b.node_b))
            adj[b.node_b].append((b, b.node_a))
        return adj

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise ValidationError(f"no branch with id {branch_id!r}")

    def with_port(self, name: str, port: Port) -> "NetworkTopology":
        ports = dict(self.ports)
        ports[name] = port
        return replace(self, ports=ports)


@dataclass
class ValidationReport:
    valid: bool
    problems: list[str]

    def __str__(self) -> str:
        if self.valid:
            return "valid"
        return "invalid:\n" + "\n".join(f"  - {p}" for p in self.problems)


def validate_topology(net: NetworkTopology) -> ValidationReport:
    """Structural checks: tree shape, connectivity, terminated leaves,
    positive lengths, one conductor count throughout."""
    problems: list[str] = []
    nodes = list(net.nodes)
    if len(set(nodes)) != len(nodes):
        problems.append("duplicate node ids")
    ids = [b.id for b in net.branches]
    if len(set(ids)) != len(ids):
        problems.append("duplicate branch ids")
    node_set = set(nodes)
    for b in net.branches:
        if b.node_a not in node_set or b.node_b not in node_set:
            problems.append(f"branch {b.id!r} references unknown nodes")
        if b.node_a == b.node_b:
            problems.append(f"branch {b.id!r} is a self-loop")
        if not b.length_m > 0:
            problems.append(f"branch {b.id!r} has non-positive length")
    for node in net.loads:
        if node not in node_set:
            problems.append(f"load references unknown node {node!r}")
    for name, port in net.ports.items():
        if port.node not in node_set:
            problems.append(f"port {name!r} references unknown node {port.node!r}")

    if len(net.branches) != len(nodes) - 1:
        problems.append(
            f"not a tree: {len(nodes)} nodes need {len(nodes) - 1} branches, "
            f"found {len(net.branches)}")
    if not problems:
        adj = net.adjacency()
        seen = {nodes[0]}
        queue = deque([nodes[0]])
        while queue:
            u = queue.popleft()
            for _, v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if len(seen) != len(nodes):
            problems.append("not connected")
        else:
            port_nodes = {p.node for p in net.ports.values()}
            for n in nodes:
                if len(adj[n]) == 1 and n not in net.loads and n not in port_nodes:
                    problems.append(f"dangling leaf {n!r}: no load and no port")

    counts = {b.cable.n_conductors for b in net.branches}
    counts |= {ld.n_conductors for ld in net.loads.values()}
    counts |= {p.source.n_conductors for p in net.ports.values()}
    if len(counts) > 1:
        problems.append(f"mixed conductor counts {sorted(counts)}")

    return ValidationReport(valid=not problems, problems=problems)


def _require_valid(net: NetworkTopology) -> None:
    report = validate_topology(net)
    if not report.valid:
        raise ValidationError("invalid topology: " + "; ".join(report.problems))


# ---------------------------------------------------------------------------
# traversal helpers

def _rooted_children(net: NetworkTopology, root: str):
    """Parent map and post-order node list for the tree rooted at ``root``."""
    adj = net.adjacency()
    parent: dict[str, tuple[Branch, str] | None] = {root: None}
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for b, v in adj[u]:
            if v not in parent:
                parent[v] = (b, u)
                order.append(v)
                queue.append(v)
    children: dict[str, list[tuple[Branch, str]]] = {n: [] for n in parent}
    for v, pv in parent.items():
        if pv is not None:
            children[pv[1]].append((pv[0], v))
    return parent, children, list(reversed(order))


def tree_path(net: NetworkTopology, a: str, b: str) -> list[tuple[Branch, str, str]]:
    """Branch sequence from a to b as (branch, near_node, far_node) triples."""
    parent, _, _ = _rooted_children(net, a)
    if b not in parent:
        raise ValidationError(f"nodes {a!r} and {b!r} are not connected")
    path = []
    node = b
    while node != a:
        br, up = parent[node]
        path.append((br, up, node))
        node = up
    return list(reversed(path))


def node_distances(net: NetworkTopology, origin: str) -> dict[str, float]:
    """Path length in meters from ``origin`` to every node."""
    adj = net.adjacency()
    dist = {origin: 0.0}
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        for b, v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + b.length_m
                queue.append(v)
    return dist


def farthest_node(net: NetworkTopology, origin: str) -> str:
    dist = node_distances(net, origin)
    return max(dist, key=lambda n: (dist[n], n))


# ---------------------------------------------------------------------------
# reduction

def _carry_back(cable: CableSpec, grid: FrequencyGrid, length: float,
                y_far: np.ndarray, branch_id: str) -> np.ndarray:
    """Equivalent admittance at the near end of one branch whose far end is
    terminated by y_far."""
    params = line_propagation_params(cable, grid)
    f = grid.frequencies
    try:
        rho = load_reflection(y_far, params.yc, f)
        rho_m = modal_transform(rho, params.t, "to_modal", f)
        return input_admittance_line(params, length, rho_m)
    except SingularityError as exc:
        raise SingularityError(f"branch {branch_id!r}: {exc}") from exc


@dataclass(eq=False)
class PortReduction:
    port: str
    y_in: MatrixSpectrum
    node_equivalents: dict[str, MatrixSpectrum]


def reduce_to_port(net: NetworkTopology, port: str,
                   grid: FrequencyGrid) -> PortReduction:
    """Carry all terminations back to a port, depth-first from the leaves.

    Every node's equivalent admittance (its own load plus the carried-back
    admittances of its child branches, seen from the port side) is returned
    alongside the port input admittance.
    """
    _require_valid(net)
    if port not in net.ports:
        raise UsageError(f"no port named {port!r}")
    root = net.ports[port].node
    f = grid.frequencies
    L = net.n_conductors
    _, children, postorder = _rooted_children(net, root)

    equiv: dict[str, np.ndarray] = {}
    for node in postorder:  # children come before parents
        if node in net.loads:
            y = net.loads[node].evaluate(f)
            if y.shape != (f.size, L, L):
                raise ValidationError(
                    f"load at {node!r} evaluates to shape {y.shape}")
        else:
            y = np.zeros((f.size, L, L), dtype=complex)
        for br, child in children[node]:
            y = y + _carry_back(br.cable, grid, br.length_m, equiv[child], br.id)
        equiv[node] = y

    equivalents = {n: MatrixSpectrum(grid, v, "admittance") for n, v in equiv.items()}
    return PortReduction(port=port, y_in=equivalents[root],
                         node_equivalents=equivalents)


def network_input_reflection(net: NetworkTopology, port: str,
                             grid: FrequencyGrid) -> MatrixSpectrum:
    """Input reflection at a port: the port admittance against Y_R."""
    red = reduce_to_port(net, port, grid)
    y_r = net.ports[port].source.evaluate(grid.frequencies)
    rho = input_reflection(red.y_in.values, y_r, grid.frequencies)
    return MatrixSpectrum(grid, rho, "reflection")


def end_to_end_ctf(net: NetworkTopology, tx_port: str, rx_node: str,
                   grid: FrequencyGrid) -> MatrixSpectrum:
    """Voltage transfer from the transmitting port node to a loaded receiver
    node: the ordered product of per-segment transfers along the backbone,
    each segment terminated by the equivalent admittance of everything
    beyond it (off-path subtrees included).

    The ratio is between node voltages, so the transmitter's own source
    admittance and local load do not enter.
    """
    if tx_port not in net.ports:
        raise UsageError(f"no port named {tx_port!r}")
    if rx_node not in net.loads:
        raise UsageError(f"receiver node {rx_node!r} carries no load")
    tx_node = net.ports[tx_port].node
    if rx_node == tx_node:
        raise UsageError("transmitter and receiver coincide")

    red = reduce_to_port(net, tx_port, grid)
    f = grid.frequencies
    path = tree_path(net, tx_node, rx_node)
    L = net.n_conductors
    h = np.broadcast_to(np.eye(L, dtype=complex), (grid.n_points, L, L)).copy()
    for br, _, far in path:
        params = line_propagation_params(br.cable, grid)
        y_eq = red.node_equivalents[far].values
        try:
            rho = load_reflection(y_eq, params.yc, f)
            h = ctf_line(params, br.length_m, rho) @ h
        except SingularityError as exc:
            raise SingularityError(f"segment {br.id!r}: {exc}") from exc
    return MatrixSpectrum(grid, h, "ctf")


@dataclass(eq=False)
class PortSignal:
    """Per-frequency voltages at a transmit/receive pair."""

    v_source: np.ndarray  # (n_f, L) volts, voltage at the transmitting node
    v_load: np.ndarray    # (n_f, L) volts at the receiver load
    v_echo: np.ndarray    # (n_f, L) volts reflected back into the source


def port_signals(net: NetworkTopology, tx_port: str, rx_node: str,
                 grid: FrequencyGrid, v_source) -> PortSignal:
    """Drive ``tx_port`` with a source voltage and collect the load voltage
    (through the end-to-end transfer) and the reflectometric echo."""
    h = end_to_end_ctf(net, tx_port, rx_node, grid)
    rho = network_input_reflection(net, tx_port, grid)
    f = grid.frequencies
    y_r = net.ports[tx_port].source.evaluate(f)
    L = net.n_conductors
    v = np.broadcast_to(np.asarray(v_source, dtype=complex),
                        (grid.n_points, L)).copy()
    v_load = (h.values @ v[..., None])[..., 0]
    v_echo = echo_voltage(rho.values, y_r, v, f)
    return PortSignal(v_source=v, v_load=v_load, v_echo=v_echo)


# ---------------------------------------------------------------------------
# two-section closed form (independent oracle for the recursive reduction)

@dataclass(eq=False)
class TwoSectionResponse:
    y_in: MatrixSpectrum
    rho_in: MatrixSpectrum


def _admittance_values(obj, f: np.ndarray, n: int) -> np.ndarray:
    if isinstance(obj, AdmittanceSpec):
        return obj.evaluate(f)
    a = np.asarray(obj, dtype=complex)
    if a.shape == (f.size, n, n):
        return a
    return np.broadcast_to(_as_matrix(obj, n), (f.size, n, n)).copy()


def two_section_oracle(cable1: CableSpec, l1: float, cable2: CableSpec,
                       l2: float, y_l, y_r,
                       grid: FrequencyGrid) -> TwoSectionResponse:
    """Closed-form input responses of two cascaded sections with no junction
    load: the far load is reflected to the junction through section 2 (the
    junction mismatch referenced to section 1 plays the source role), and the
    result terminates section 1 directly.

    This composes reflections instead of carrying admittances back, so it is
    an independent cross-check for reduce_to_port / network_input_reflection.
    """
    f = grid.frequencies
    p1 = line_propagation_params(cable1, grid)
    p2 = line_propagation_params(cable2, grid)
    n = cable1.n_conductors
    if cable2.n_conductors != n:
        raise ValidationError("sections must share the conductor count")
    y_l_vals = _admittance_values(y_l, f, n)
    y_r_vals = _admittance_values(y_r, f, n)

    rho_load = load_reflection(y_l_vals, p2.yc, f)
    rho_load_m = modal_transform(rho_load, p2.t, "to_modal", f)
    # junction reflection seen by section 1, via the modal closed form on
    # section 2 with the first section's characteristic admittance as source
    rho_1 = input_reflection_modal(p2, l2, rho_load_m, p1.yc)
    rho_1_m = modal_transform(rho_1, p1.t, "to_modal", f)

    y_in = input_admittance_line(p1, l1, rho_1_m)
    rho_in = input_reflection_modal(p1, l1, rho_1_m, y_r_vals)
    return TwoSectionResponse(
        y_in=MatrixSpectrum(grid, y_in, "admittance"),
        rho_in=MatrixSpectrum(grid, rho_in, "reflection"),
    )

"""Electrical anomalies and the two models that quantify their effect.

Three anomaly variants are supported:

* lumped fault: a shunt admittance appearing at a point on a branch; it adds
  a new network node with the fault admittance as its load;
* load change: a termination admittance replaced in place, no new node;
* distributed fault: a branch section whose cable is uniformly degraded,
  creating discontinuities at the section boundaries.

Given a baseline response X and the perturbed response X_a on the same grid,
the chain model describes the anomaly as a multiplicative factor
delta_chain = X_a X^-1 and the superposition model as an additive term
delta_sup = X_a - X, with the normalized variant
delta_sup_n = (X_a - X) X^-1 = delta_chain - I (an exact identity).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .errors import SingularityError, ValidationError
from .mtl import CableSpec, FrequencyGrid, MatrixSpectrum
from .network import AdmittanceSpec, Branch, NetworkTopology

__all__ = [
    "LumpedFault",
    "LoadChange",
    "DistributedFault",
    "Anomaly",
    "apply_anomaly",
    "describe_anomaly",
    "DeltaSpectrum",
    "delta_chain",
    "delta_superposition",
    "REFLECTION_CHAIN_WARNING",
]

REFLECTION_CHAIN_WARNING = (
    "chain deltas of reflection spectra are jagged where the baseline "
    "crosses zero; prefer the superposition model for reflection sensing")


@dataclass(frozen=True, eq=False)
class LumpedFault:
    """Concentrated shunt fault on a branch, ``offset_m`` from node_a.
    Conductor-to-conductor faults are off-diagonal entries of y_f."""

    branch_id: str
    offset_m: float
    y_f: AdmittanceSpec
    active: bool = False  # skip the passivity check when explicitly flagged


@dataclass(frozen=True, eq=False)
class LoadChange:
    node_id: str
    new_load: AdmittanceSpec


@dataclass(frozen=True, eq=False)
class DistributedFault:
    """Uniformly degraded cable section [start_m, start_m + extent_m] of a
    branch, measured from node_a."""

    branch_id: str
    start_m: float
    extent_m: float
    degraded: CableSpec


Anomaly = Union[LumpedFault, LoadChange, DistributedFault]


def _unique(name: str, taken: set[str]) -> str:
    candidate = name
    k = 2
    while candidate in taken:
        candidate = f"{name}~{k}"
        k += 1
    return candidate


def _split_branch(net: NetworkTopology, branch: Branch,
                  cuts: list[float], cables: list[CableSpec]) -> tuple[NetworkTopology, list[str]]:
    """Replace a branch by consecutive segments cut at the given offsets.
    ``cables`` has one entry per segment.  Returns the new topology and the
    ids of the interior nodes created, in order from node_a."""
    offsets = [0.0] + list(cuts) + [branch.length_m]
    taken_nodes = set(net.nodes)
    taken_branches = {b.id for b in net.branches}
    interior: list[str] = []
    for cut in cuts:
        node_id = _unique(f"{branch.id}@{cut:g}m", taken_nodes)
        taken_nodes.add(node_id)
        interior.append(node_id)
    endpoints = [branch.node_a] + interior + [branch.node_b]

    new_branches: list[Branch] = []
    for k, cable in enumerate(cables):
        bid = _unique(f"{branch.id}#{k + 1}", taken_branches)
        taken_branches.add(bid)
        new_branches.append(Branch(id=bid, node_a=endpoints[k],
                                   node_b=endpoints[k + 1], cable=cable,
                                   length_m=offsets[k + 1] - offsets[k]))

    branches = tuple(b for b in net.branches if b.id != branch.id) + tuple(new_branches)
    nodes = net.nodes + tuple(interior)
    return replace(net, nodes=nodes, branches=branches), interior


def apply_anomaly(net: NetworkTopology, anomaly: Anomaly,
                  grid: FrequencyGrid | None = None) -> NetworkTopology:
    """Return a new topology with the anomaly inserted.  The input network is
    left untouched.  When a grid is supplied, lumped fault admittances are
    checked for passivity unless flagged active."""
    if isinstance(anomaly, LumpedFault):
        branch = net.branch(anomaly.branch_id)
        if not 0.0 < anomaly.offset_m < branch.length_m:
            raise ValidationError(
                f"fault offset {anomaly.offset_m:g} m outside branch "
                f"{branch.id!r} interior (0, {branch.length_m:g})")
        if anomaly.y_f.n_conductors != net.n_conductors:
            raise ValidationError("fault admittance conductor count mismatch")
        if grid is not None and not anomaly.active:
            if not anomaly.y_f.is_passive(grid.frequencies):
                raise ValidationError(
                    "fault admittance has an eigenvalue with negative real "
                    "part; set active=True if this is intended")
        out, interior = _split_branch(net, branch, [anomaly.offset_m],
                                      [branch.cable, branch.cable])
        loads = dict(out.loads)
        loads[interior[0]] = anomaly.y_f
        return replace(out, loads=loads)

    if isinstance(anomaly, LoadChange):
        if anomaly.node_id not in net.loads:
            raise ValidationError(
                f"node {anomaly.node_id!r} carries no load to change")
        if anomaly.new_load.n_conductors != net.n_conductors:
            raise ValidationError("replacement load conductor count mismatch")
        loads = dict(net.loads)
        loads[anomaly.node_id] = anomaly.new_load
        return replace(net, loads=loads)

    if isinstance(anomaly, DistributedFault):
        branch = net.branch(anomaly.branch_id)
        start, extent = anomaly.start_m, anomaly.extent_m
        if extent <= 0:
            raise ValidationError("distributed fault extent must be positive")
        if start < 0 or start + extent > branch.length_m:
            raise ValidationError(
                f"degraded section [{start:g}, {start + extent:g}] m outside "
                f"branch {branch.id!r} of length {branch.length_m:g} m")
        if anomaly.degraded.n_conductors != branch.cable.n_conductors:
            raise ValidationError("degraded cable conductor count mismatch")
        cuts, cables = [], []
        if start > 0:
            cuts.append(start)
            cables.append(branch.cable)
        cables.append(anomaly.degraded)
        if start + extent < branch.length_m:
            cuts.append(start + extent)
            cables.append(branch.cable)
        if not cuts:  # whole branch degraded: just swap the cable
            branches = tuple(
                replace(b, cable=anomaly.degraded) if b.id == branch.id else b
                for b in net.branches)
            return replace(net, branches=branches)
        out, _ = _split_branch(net, branch, cuts, cables)
        return out

    raise ValidationError(f"unknown anomaly type {type(anomaly).__name__}")


def describe_anomaly(anomaly: Anomaly) -> dict:
    """Plain-dict descriptor for reports and CSV records."""
    if isinstance(anomaly, LumpedFault):
        return {"type": "lumped_fault", "branch": anomaly.branch_id,
                "offset_m": anomaly.offset_m, "y_f": anomaly.y_f.label}
    if isinstance(anomaly, LoadChange):
        return {"type": "load_change", "node": anomaly.node_id,
                "load": anomaly.new_load.label}
    if isinstance(anomaly, DistributedFault):
        return {"type": "distributed_fault", "branch": anomaly.branch_id,
                "start_m": anomaly.start_m, "extent_m": anomaly.extent_m,
                "cable": anomaly.degraded.label}
    raise ValidationError(f"unknown anomaly type {type(anomaly).__name__}")


# ---------------------------------------------------------------------------
# effect models

@dataclass(eq=False)
class DeltaSpectrum:
    """Anomaly effect on one quantity under one model.  Chain deltas are
    dimensionless multiplicative factors; superposition deltas carry the
    quantity's units."""

    model: str     # chain | superposition | superposition_normalized
    quantity: str  # admittance | reflection | ctf
    values: MatrixSpectrum
    warning: str | None = None


def _check_pair(perturbed: MatrixSpectrum, baseline: MatrixSpectrum) -> str:
    if perturbed.grid != baseline.grid:
        raise ValidationError("perturbed and baseline spectra use different grids")
    if perturbed.kind != baseline.kind:
        raise ValidationError("perturbed and baseline spectra are different quantities")
    if baseline.kind not in ("admittance", "reflection", "ctf"):
        raise ValidationError(f"deltas are undefined for kind {baseline.kind!r}")
    return baseline.kind


def _right_divide(num: np.ndarray, den: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    try:
        return np.swapaxes(
            np.linalg.solve(np.swapaxes(den, -1, -2), np.swapaxes(num, -1, -2)),
            -1, -2)
    except np.linalg.LinAlgError as exc:
        with np.errstate(all="ignore"):
            dets = np.nan_to_num(np.abs(np.linalg.det(den)), nan=0.0)
        k = int(np.argmin(dets))
        raise SingularityError("baseline response is singular",
                               frequency_hz=float(grid.frequencies[k])) from exc


def delta_chain(perturbed: MatrixSpectrum, baseline: MatrixSpectrum) -> DeltaSpectrum:
    """Multiplicative anomaly factor X_a X^-1 per frequency."""
    quantity = _check_pair(perturbed, baseline)
    vals = _right_divide(perturbed.values, baseline.values, baseline.grid)
    warning = REFLECTION_CHAIN_WARNING if quantity == "reflection" else None
    return DeltaSpectrum(model="chain", quantity=quantity,
                         values=MatrixSpectrum(baseline.grid, vals, "delta"),
                         warning=warning)


def delta_superposition(perturbed: MatrixSpectrum, baseline: MatrixSpectrum,
                        normalize: bool = False) -> DeltaSpectrum:
    """Additive anomaly term X_a - X; normalized variant (X_a - X) X^-1,
    which equals the chain delta minus the identity."""
    quantity = _check_pair(perturbed, baseline)
    diff = perturbed.values - baseline.values
    if normalize:
        vals = _right_divide(diff, baseline.values, baseline.grid)
        model = "superposition_normalized"
    else:
        vals = diff
        model = "superposition"
    return DeltaSpectrum(model=model, quantity=quantity,
                         values=MatrixSpectrum(baseline.grid, vals, "delta"))

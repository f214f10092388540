"""Anomaly insertion and the chain/superposition effect models."""

import numpy as np
import pytest

from plnsim.anomalies import (DistributedFault, LoadChange, LumpedFault,
                              REFLECTION_CHAIN_WARNING, apply_anomaly,
                              delta_chain, delta_superposition,
                              describe_anomaly)
from plnsim.cables import scaled_cable
from plnsim.errors import SingularityError, ValidationError
from plnsim.mtl import FrequencyGrid, MatrixSpectrum
from plnsim.network import (conductance, constant_admittance,
                            end_to_end_ctf, network_input_reflection,
                            parallel_rc_admittance, reduce_to_port,
                            validate_topology)

from conftest import single_line_net


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


@pytest.fixture()
def base_net(std_cable):
    return single_line_net(std_cable, 120.0, parallel_rc_admittance(200.0, 1e-9))


def responses(net, grid):
    y = reduce_to_port(net, "p", grid).y_in
    rho = network_input_reflection(net, "p", grid)
    h = end_to_end_ctf(net, "p", "b", grid)
    return y, rho, h


# ---------------------------------------------------------------------------
# structural application

def test_lumped_fault_adds_loaded_node(base_net, grid):
    fault = LumpedFault("s", 40.0, conductance(0.05))
    out = apply_anomaly(base_net, fault, grid)
    assert validate_topology(out).valid
    assert len(out.branches) == 2
    new_nodes = set(out.nodes) - set(base_net.nodes)
    assert len(new_nodes) == 1
    node = new_nodes.pop()
    assert node in out.loads
    assert {b.length_m for b in out.branches} == {40.0, 80.0}
    assert base_net.nodes == ("a", "b")  # input untouched


def test_lumped_fault_offset_range(base_net, grid):
    for off in (-1.0, 0.0, 120.0, 200.0):
        with pytest.raises(ValidationError, match="offset"):
            apply_anomaly(base_net, LumpedFault("s", off, conductance(0.01)), grid)


def test_lumped_fault_conductor_mismatch(base_net, grid):
    with pytest.raises(ValidationError, match="conductor"):
        apply_anomaly(base_net, LumpedFault("s", 40.0, conductance(0.01, 2)), grid)


def test_active_fault_needs_flag(base_net, grid):
    hot = constant_admittance(-0.01, label="negative-g")
    with pytest.raises(ValidationError, match="active"):
        apply_anomaly(base_net, LumpedFault("s", 40.0, hot), grid)
    out = apply_anomaly(base_net, LumpedFault("s", 40.0, hot, active=True), grid)
    assert validate_topology(out).valid


def test_load_change_requires_existing_load(base_net, grid):
    with pytest.raises(ValidationError, match="no load"):
        apply_anomaly(base_net, LoadChange("a", conductance(0.01)), grid)
    out = apply_anomaly(base_net, LoadChange("b", conductance(0.02)), grid)
    assert out.loads["b"].label == "g=0.02S"


def test_distributed_fault_splits_three_ways(base_net, grid, std_cable):
    degraded = scaled_cable(std_cable, c_scale=1.3, label="aged")
    out = apply_anomaly(base_net, DistributedFault("s", 30.0, 50.0, degraded), grid)
    assert validate_topology(out).valid
    assert len(out.branches) == 3
    lengths = sorted(b.length_m for b in out.branches)
    assert lengths == [30.0, 40.0, 50.0]
    labels = {b.cable.label for b in out.branches}
    assert labels == {"pl-std", "aged"}


def test_distributed_fault_boundary_cases(base_net, grid, std_cable):
    degraded = scaled_cable(std_cable, c_scale=1.3, label="aged")
    two = apply_anomaly(base_net, DistributedFault("s", 0.0, 50.0, degraded), grid)
    assert len(two.branches) == 2
    whole = apply_anomaly(base_net, DistributedFault("s", 0.0, 120.0, degraded), grid)
    assert len(whole.branches) == 1
    assert whole.branches[0].cable.label == "aged"
    with pytest.raises(ValidationError, match="outside"):
        apply_anomaly(base_net, DistributedFault("s", 100.0, 50.0, degraded), grid)


def test_describe_anomaly(base_net):
    d = describe_anomaly(LumpedFault("s", 40.0, conductance(0.05)))
    assert d["type"] == "lumped_fault" and d["offset_m"] == 40.0


# ---------------------------------------------------------------------------
# zero-severity identities (all three variants)

def test_zero_severity_lumped(base_net, grid):
    out = apply_anomaly(base_net, LumpedFault("s", 40.0, conductance(0.0)), grid)
    for a, b in zip(responses(out, grid), responses(base_net, grid)):
        assert rel_err(a.values, b.values) < 1e-12


def test_zero_severity_load_change(base_net, grid):
    out = apply_anomaly(base_net, LoadChange("b", base_net.loads["b"]), grid)
    for a, b in zip(responses(out, grid), responses(base_net, grid)):
        assert rel_err(a.values, b.values) < 1e-12


def test_zero_severity_distributed(base_net, grid, std_cable):
    out = apply_anomaly(base_net, DistributedFault("s", 30.0, 50.0, std_cable),
                        grid)
    for a, b in zip(responses(out, grid), responses(base_net, grid)):
        assert rel_err(a.values, b.values) < 1e-12


# ---------------------------------------------------------------------------
# delta models

def test_chain_identity_on_equal_spectra(base_net, grid):
    y, _, _ = responses(base_net, grid)
    d = delta_chain(y, y)
    assert np.max(np.abs(d.values.values - np.eye(1))) < 1e-13
    assert d.model == "chain" and d.quantity == "admittance"
    assert d.warning is None


def test_chain_is_scalar_division(base_net, grid):
    y0, _, _ = responses(base_net, grid)
    out = apply_anomaly(base_net, LumpedFault("s", 40.0, conductance(0.03)), grid)
    y1, _, _ = responses(out, grid)
    d = delta_chain(y1, y0)
    ref = y1.values[:, 0, 0] / y0.values[:, 0, 0]
    assert rel_err(d.values.values[:, 0, 0], ref) < 1e-12


def test_reflection_chain_carries_warning(base_net, grid):
    _, rho, _ = responses(base_net, grid)
    d = delta_chain(rho, rho)
    assert d.warning == REFLECTION_CHAIN_WARNING


def test_superposition_zero_and_normalized_identity(base_net, grid):
    y0, _, _ = responses(base_net, grid)
    out = apply_anomaly(base_net, LumpedFault("s", 40.0, conductance(0.03)), grid)
    y1, _, _ = responses(out, grid)
    plain = delta_superposition(y0, y0)
    assert np.max(np.abs(plain.values.values)) == 0.0
    norm = delta_superposition(y1, y0, normalize=True)
    chain = delta_chain(y1, y0)
    # the normalized superposition delta is the chain delta minus identity
    assert np.max(np.abs(norm.values.values
                         - (chain.values.values - np.eye(1)))) < 1e-12


def test_delta_grid_mismatch(base_net, grid):
    other = FrequencyGrid(1e5, 2e5, grid.n_points)
    y0, _, _ = responses(base_net, grid)
    y_other = MatrixSpectrum(other, y0.values, "admittance")
    with pytest.raises(ValidationError, match="grid"):
        delta_chain(y_other, y0)


def test_delta_singular_baseline(grid):
    zeros = MatrixSpectrum(grid, np.zeros((grid.n_points, 1, 1), complex),
                           "admittance")
    with pytest.raises(SingularityError, match="singular"):
        delta_chain(zeros, zeros)


def test_delta_rejects_delta_kind(base_net, grid):
    y0, _, _ = responses(base_net, grid)
    d = delta_superposition(y0, y0)
    with pytest.raises(ValidationError, match="kind"):
        delta_chain(d.values, d.values)

"""Topology validation, carry-back reduction, end-to-end transfer and the
two-section closed-form cross-check."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plnsim.cables import powerline_cable
from plnsim.errors import SingularityError, UsageError, ValidationError
from plnsim.mtl import (line_propagation_params, input_admittance_line,
                        load_reflection, modal_transform)
from plnsim.network import (Branch, NetworkTopology, Port,
                            constant_admittance, end_to_end_ctf, farthest_node,
                            network_input_reflection, node_distances,
                            open_circuit, parallel_rc_admittance, port_signals,
                            reduce_to_port, table_admittance, tree_path,
                            two_section_oracle, validate_topology)

from conftest import lossless_cable, matched_load, single_line_net


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def modem(y=0.02, n=1):
    return constant_admittance(y, n, label="modem")


# ---------------------------------------------------------------------------
# validation

def test_valid_two_node(std_cable):
    net = single_line_net(std_cable, 100.0, parallel_rc_admittance(200.0, 1e-9))
    report = validate_topology(net)
    assert report.valid
    assert str(report) == "valid"


def test_cycle_is_not_a_tree(std_cable):
    net = NetworkTopology(
        nodes=("a", "b", "c"),
        branches=(Branch("1", "a", "b", std_cable, 10.0),
                  Branch("2", "b", "c", std_cable, 10.0),
                  Branch("3", "c", "a", std_cable, 10.0)),
        loads={}, ports={"p": Port("a", modem())})
    report = validate_topology(net)
    assert not report.valid
    assert any("not a tree" in p for p in report.problems)


def test_dangling_leaf(std_cable):
    net = NetworkTopology(
        nodes=("a", "b"),
        branches=(Branch("1", "a", "b", std_cable, 10.0),),
        loads={}, ports={"p": Port("a", modem())})
    report = validate_topology(net)
    assert not report.valid
    assert any("dangling leaf" in p for p in report.problems)


def test_mixed_conductor_counts(std_cable, coupled_cable):
    net = NetworkTopology(
        nodes=("a", "b", "c"),
        branches=(Branch("1", "a", "b", std_cable, 10.0),
                  Branch("2", "b", "c", coupled_cable, 10.0)),
        loads={"c": open_circuit(2)}, ports={"p": Port("a", modem())})
    report = validate_topology(net)
    assert not report.valid
    assert any("conductor" in p for p in report.problems)


def test_bad_lengths_and_references(std_cable):
    net = NetworkTopology(
        nodes=("a", "b"),
        branches=(Branch("1", "a", "b", std_cable, -5.0),),
        loads={"b": modem(), "zz": modem()},
        ports={"p": Port("a", modem())})
    report = validate_topology(net)
    assert any("length" in p for p in report.problems)
    assert any("unknown node" in p for p in report.problems)


# ---------------------------------------------------------------------------
# reduction

def test_single_branch_matched(grid, std_cable):
    net = single_line_net(std_cable, 120.0, matched_load(std_cable, grid))
    red = reduce_to_port(net, "p", grid)
    p = line_propagation_params(std_cable, grid)
    assert rel_err(red.y_in.values, p.yc) < 1e-12


def test_star_of_matched_branches(grid, std_cable):
    ml = matched_load(std_cable, grid)
    net = NetworkTopology(
        nodes=("a", "b", "c"),
        branches=(Branch("1", "a", "b", std_cable, 50.0),
                  Branch("2", "a", "c", std_cable, 80.0),),
        loads={"b": ml, "c": ml},
        ports={"p": Port("a", modem())})
    red = reduce_to_port(net, "p", grid)
    p = line_propagation_params(std_cable, grid)
    assert rel_err(red.y_in.values, 2.0 * p.yc) < 1e-12


def test_junction_additivity(grid, std_cable, lib):
    # equivalent admittance at the junction equals the sum of the children's
    # carried-back admittances, reconstructed here by hand per branch
    low = lib["pl-lowloss"]
    net = NetworkTopology(
        nodes=("p0", "j", "x", "y", "z"),
        branches=(Branch("t", "p0", "j", std_cable, 60.0),
                  Branch("1", "j", "x", std_cable, 40.0),
                  Branch("2", "j", "y", low, 70.0),
                  Branch("3", "j", "z", low, 90.0)),
        loads={"x": parallel_rc_admittance(100.0, 1e-9),
               "y": parallel_rc_admittance(400.0, 5e-9),
               "z": constant_admittance(1 / 50)},
        ports={"p": Port("p0", modem())})
    red = reduce_to_port(net, "p", grid)
    f = grid.frequencies
    total = np.zeros((grid.n_points, 1, 1), complex)
    for bid in ("1", "2", "3"):
        br = net.branch(bid)
        pp = line_propagation_params(br.cable, grid)
        y_leaf = net.loads[br.node_b].evaluate(f)
        rho_m = modal_transform(load_reflection(y_leaf, pp.yc), pp.t, "to_modal")
        total += input_admittance_line(pp, br.length_m, rho_m)
    assert rel_err(red.node_equivalents["j"].values, total) < 1e-12


@pytest.mark.parametrize("k", [2, 3, 5])
def test_segment_splitting_invariance(grid, std_cable, k):
    load = parallel_rc_admittance(150.0, 2e-9)
    whole = single_line_net(std_cable, 120.0, load)
    nodes = ["a"] + [f"m{i}" for i in range(1, k)] + ["b"]
    branches = tuple(
        Branch(f"s{i}", nodes[i], nodes[i + 1], std_cable, 120.0 / k)
        for i in range(k))
    split = NetworkTopology(nodes=tuple(nodes), branches=branches,
                            loads={"b": load}, ports={"p": Port("a", modem())})
    rw = reduce_to_port(whole, "p", grid)
    rs = reduce_to_port(split, "p", grid)
    assert rel_err(rs.y_in.values, rw.y_in.values) < 1e-9
    hw = end_to_end_ctf(whole, "p", "b", grid)
    hs = end_to_end_ctf(split, "p", "b", grid)
    assert rel_err(hs.values, hw.values) < 1e-9
    pw = network_input_reflection(whole, "p", grid)
    ps = network_input_reflection(split, "p", grid)
    assert rel_err(ps.values, pw.values) < 1e-9


def test_reduction_error_carries_branch_id(grid, std_cable):
    p = line_propagation_params(std_cable, grid)
    # a load equal to -Y_C makes the branch reflection degenerate
    bad = table_admittance(grid.frequencies, -p.yc[:, 0, 0])
    net = single_line_net(std_cable, 30.0, bad)
    with pytest.raises(SingularityError, match="branch 's'"):
        reduce_to_port(net, "p", grid)


def test_reduce_invalid_topology_rejected(grid, std_cable):
    net = NetworkTopology(nodes=("a", "b"),
                          branches=(Branch("1", "a", "b", std_cable, 10.0),),
                          loads={}, ports={"p": Port("a", modem())})
    with pytest.raises(ValidationError, match="dangling"):
        reduce_to_port(net, "p", grid)
    good = single_line_net(std_cable, 10.0, modem())
    with pytest.raises(UsageError, match="port"):
        reduce_to_port(good, "nosuch", grid)


# ---------------------------------------------------------------------------
# input reflection at a port

def test_reflection_zero_when_source_tracks_input(grid, std_cable):
    net = single_line_net(std_cable, 75.0, parallel_rc_admittance(90.0, 3e-9))
    red = reduce_to_port(net, "p", grid)
    y_in = red.y_in.values
    tracking = table_admittance(grid.frequencies, y_in[:, 0, 0])
    net2 = NetworkTopology(nodes=net.nodes, branches=net.branches,
                           loads=net.loads, ports={"p": Port("a", tracking)})
    rho = network_input_reflection(net2, "p", grid)
    assert np.max(np.abs(rho.values)) < 1e-12


def test_reflection_matched_branch(grid, std_cable):
    p = line_propagation_params(std_cable, grid)
    net = single_line_net(std_cable, 75.0, matched_load(std_cable, grid))
    src = table_admittance(grid.frequencies, p.yc[:, 0, 0])
    net = NetworkTopology(nodes=net.nodes, branches=net.branches,
                          loads=net.loads, ports={"p": Port("a", src)})
    rho = network_input_reflection(net, "p", grid)
    assert np.max(np.abs(rho.values)) < 1e-12


def test_open_lossless_unimodular_reflection(grid):
    # lossless one-port conserves energy: |rho_in| = 1 at every frequency
    cab = lossless_cable(2.5e-7, 1e-10)
    net = single_line_net(cab, 37.0, open_circuit())
    rho = network_input_reflection(net, "p", grid)
    assert np.max(np.abs(np.abs(rho.values[:, 0, 0]) - 1.0)) < 1e-9


# ---------------------------------------------------------------------------
# end-to-end transfer

def test_matched_single_branch_ctf(grid, std_cable):
    net = single_line_net(std_cable, 120.0, matched_load(std_cable, grid))
    h = end_to_end_ctf(net, "p", "b", grid)
    p = line_propagation_params(std_cable, grid)
    assert rel_err(h.values[:, 0, 0], np.exp(-p.gamma[:, 0] * 120.0)) < 1e-9


def test_ctf_usage_errors(grid, std_cable):
    net = single_line_net(std_cable, 50.0, parallel_rc_admittance(100.0, 1e-9))
    with pytest.raises(UsageError, match="load"):
        end_to_end_ctf(net, "p", "a", grid)  # port node carries no load here
    with pytest.raises(UsageError, match="port"):
        end_to_end_ctf(net, "nosuch", "b", grid)


def test_reciprocity_equal_terminations(grid, std_cable, lib):
    # mirror-symmetric network with all four terminations equal: the two
    # directions must agree elementwise
    both = constant_admittance(1 / 75)
    lateral = parallel_rc_admittance(300.0, 5e-9)
    net = NetworkTopology(
        nodes=("A", "J", "B", "L"),
        branches=(Branch("ba", "A", "J", std_cable, 80.0),
                  Branch("bb", "J", "B", std_cable, 80.0),
                  Branch("bl", "J", "L", lib["pl-lowloss"], 45.0)),
        loads={"A": both, "B": both, "L": lateral},
        ports={"pa": Port("A", both), "pb": Port("B", both)})
    h_ab = end_to_end_ctf(net, "pa", "B", grid)
    h_ba = end_to_end_ctf(net, "pb", "A", grid)
    assert rel_err(h_ab.values, h_ba.values) < 1e-9


def test_reciprocity_breaks_with_unequal_loads(grid, std_cable, lib):
    la = constant_admittance(1 / 30)
    lb = constant_admittance(1 / 700)
    net = NetworkTopology(
        nodes=("A", "J", "B", "L"),
        branches=(Branch("ba", "A", "J", std_cable, 80.0),
                  Branch("bb", "J", "B", std_cable, 80.0),
                  Branch("bl", "J", "L", lib["pl-lowloss"], 45.0)),
        loads={"A": la, "B": lb, "L": parallel_rc_admittance(300.0, 5e-9)},
        ports={"pa": Port("A", modem()), "pb": Port("B", modem())})
    h_ab = end_to_end_ctf(net, "pa", "B", grid)
    h_ba = end_to_end_ctf(net, "pb", "A", grid)
    assert rel_err(h_ab.values, h_ba.values) > 1e-3


def test_port_signals_scalar(grid, std_cable):
    load = parallel_rc_admittance(200.0, 1e-9)
    net = single_line_net(std_cable, 90.0, load)
    sig = port_signals(net, "p", "b", grid, np.array([1.5]))
    h = end_to_end_ctf(net, "p", "b", grid)
    rho = network_input_reflection(net, "p", grid)
    assert rel_err(sig.v_load[:, 0], 1.5 * h.values[:, 0, 0]) < 1e-12
    assert rel_err(sig.v_echo[:, 0], -1.5 * rho.values[:, 0, 0]) < 1e-12


# ---------------------------------------------------------------------------
# two-section closed form

def two_section_chain(c1, l1, c2, l2, load):
    return NetworkTopology(
        nodes=("a", "j", "b"),
        branches=(Branch("s1", "a", "j", c1, l1),
                  Branch("s2", "j", "b", c2, l2)),
        loads={"b": load}, ports={"p": Port("a", modem())})


def test_two_section_same_cable_collapses(grid, std_cable):
    load = parallel_rc_admittance(150.0, 2e-9)
    osc = two_section_oracle(std_cable, 90.0, std_cable, 60.0, load,
                             modem(), grid)
    whole = single_line_net(std_cable, 150.0, load)
    red = reduce_to_port(whole, "p", grid)
    rho = network_input_reflection(whole, "p", grid)
    assert rel_err(osc.y_in.values, red.y_in.values) < 1e-9
    assert rel_err(osc.rho_in.values, rho.values) < 1e-9


def test_two_section_zero_second_length(grid, std_cable, lib):
    load = parallel_rc_admittance(150.0, 2e-9)
    osc = two_section_oracle(std_cable, 90.0, lib["pl-lowloss"], 0.0, load,
                             modem(), grid)
    single = single_line_net(std_cable, 90.0, load)
    red = reduce_to_port(single, "p", grid)
    assert rel_err(osc.y_in.values, red.y_in.values) < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_two_section_matches_recursion(seed):
    from plnsim.mtl import FrequencyGrid
    grid = FrequencyGrid(1e5, 4e5, 50)
    rng = np.random.default_rng(seed)
    c1 = powerline_cable(r0_ohm_per_m=rng.uniform(0.02, 0.3),
                         l_h_per_m=rng.uniform(2e-7, 8e-7),
                         c_f_per_m=rng.uniform(4e-11, 2e-10), label="c1")
    c2 = powerline_cable(r0_ohm_per_m=rng.uniform(0.02, 0.3),
                         l_h_per_m=rng.uniform(2e-7, 8e-7),
                         c_f_per_m=rng.uniform(4e-11, 2e-10), label="c2")
    l1, l2 = rng.uniform(10, 200, size=2)
    load = parallel_rc_admittance(rng.uniform(20, 800), rng.uniform(1e-9, 5e-8))
    osc = two_section_oracle(c1, l1, c2, l2, load, modem(), grid)
    net = two_section_chain(c1, l1, c2, l2, load)
    red = reduce_to_port(net, "p", grid)
    rho = network_input_reflection(net, "p", grid)
    assert rel_err(osc.y_in.values, red.y_in.values) < 1e-9
    assert rel_err(osc.rho_in.values, rho.values) < 1e-9


# ---------------------------------------------------------------------------
# path helpers

def test_tree_path_and_distances(std_cable):
    net = NetworkTopology(
        nodes=("a", "j", "b", "c"),
        branches=(Branch("1", "a", "j", std_cable, 10.0),
                  Branch("2", "j", "b", std_cable, 20.0),
                  Branch("3", "j", "c", std_cable, 35.0)),
        loads={"b": modem(), "c": modem()},
        ports={"p": Port("a", modem())})
    path = tree_path(net, "a", "b")
    assert [(b.id, near, far) for b, near, far in path] == [
        ("1", "a", "j"), ("2", "j", "b")]
    dist = node_distances(net, "a")
    assert dist == {"a": 0.0, "j": 10.0, "b": 30.0, "c": 45.0}
    assert farthest_node(net, "a") == "c"

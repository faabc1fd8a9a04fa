import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _nets import dense_oracle, netlist, random_network
from siif_pdn.errors import DomainError, NumericalError, TopologyError
from siif_pdn.netlist import BranchKind
from siif_pdn.solver import (LoadModel, assemble_mna, kcl_residual, power_balance, solve_dc,
                             solve_transient)

R, L, C, V, I = (BranchKind.R, BranchKind.L, BranchKind.C, BranchKind.VSOURCE,
                 BranchKind.ISOURCE)


def divider():
    return netlist(3, [(V, 1, 0, 48.0, "s"), (R, 1, 2, 10.0, "r1"), (R, 2, 0, 10.0, "r2")])


def test_dimension_source_and_resistor():
    assert assemble_mna(netlist(2, [(V, 1, 0, 1.0, "s"), (R, 1, 0, 1.0, "r")])).dimension == 2


def test_dimension_series_vrl():
    net = netlist(3, [(V, 1, 0, 1.0, "s"), (R, 1, 2, 1.0, "r"), (L, 2, 0, 1e-9, "l")])
    assert assemble_mna(net).dimension == 4


def test_divider_midpoint():
    res = solve_dc(divider())
    assert res.node_voltages[2] == pytest.approx(24.0, rel=1e-14)
    bal = power_balance(res, divider())
    i = 48.0 / 20.0
    assert bal["resistive_loss"] == pytest.approx(i * i * 20.0, rel=1e-14)
    assert bal["source_power"] == pytest.approx(bal["resistive_loss"], rel=1e-14)


def test_inductor_is_dc_short_and_capacitor_open():
    net = netlist(4, [(V, 1, 0, 2.0, "s"), (L, 1, 2, 1e-6, "l"), (R, 2, 0, 1.0, "r"),
                      (C, 2, 3, 1e-6, "c"), (R, 3, 0, 5.0, "rc")])
    v = solve_dc(net).node_voltages
    assert v[2] == pytest.approx(2.0, rel=1e-14)
    assert v[3] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_random_network_matches_dense_oracle(seed):
    net = random_network(np.random.default_rng(seed))
    v = solve_dc(net).node_voltages
    ref = dense_oracle(net)
    assert np.max(np.abs(v - ref) / np.abs(ref).max()) < 1e-9


@pytest.mark.parametrize("k", [0.5, 3.0, 10.0])
def test_load_scaling_scales_drops(k):
    net = random_network(np.random.default_rng(7))
    v0 = solve_dc(net, load_scale=0.0).node_voltages
    base = v0 - solve_dc(net).node_voltages
    scaled = v0 - solve_dc(net, load_scale=k).node_voltages
    assert np.allclose(scaled, k * base, rtol=1e-9, atol=1e-12)


def test_superposition_of_two_loads():
    net = netlist(4, [(V, 1, 0, 1.0, "s"), (R, 1, 2, 0.3, "a"), (R, 2, 3, 0.2, "b"),
                      (R, 1, 3, 0.7, "c"), (I, 2, 0, 1.5, "l1"), (I, 3, 0, 0.5, "l2")])
    only1 = net.__class__(net.nodes, net.branches[:-1])
    only2 = net.__class__(net.nodes, net.branches[:-2] + net.branches[-1:])
    drop = lambda n: 1.0 - solve_dc(n).node_voltages[1:]
    both = drop(net)
    assert np.allclose(both, drop(only1) + drop(only2), rtol=1e-9, atol=1e-15)


def test_passivity_and_kcl_on_random_network():
    net = random_network(np.random.default_rng(11), grounded=False)
    res = solve_dc(net)
    v = res.node_voltages
    load_nodes = [b.a for b in net.branches if b.kind is I]
    inner = v[1:]
    assert inner.max() <= 1.0 + 1e-12
    assert inner.min() >= v[load_nodes].min() - 1e-12
    i_total = sum(b.value for b in net.branches if b.kind is I)
    assert np.abs(kcl_residual(net, res)).max() < 1e-9 * i_total


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 60))
def test_power_balance_property(seed, n):
    net = random_network(np.random.default_rng(seed), n_nodes=n, n_loads=3)
    bal = power_balance(solve_dc(net), net)
    assert bal["source_power"] == pytest.approx(bal["load_power"] + bal["resistive_loss"], rel=1e-9)


def test_floating_node_diagnostic():
    net = netlist(4, [(V, 1, 0, 1.0, "s"), (R, 1, 2, 1.0, "r"), (C, 2, 3, 1e-9, "c"),
                      (I, 3, 0, 1.0, "load")])
    with pytest.raises(TopologyError, match="n3"):
        solve_dc(net)


def test_voltage_source_loop_is_singular():
    net = netlist(2, [(V, 1, 0, 1.0, "a"), (V, 1, 0, 2.0, "b"), (R, 1, 0, 1.0, "r")])
    with pytest.raises(NumericalError):
        solve_dc(net)


# ----------------------------------------------------------------- transient


def rc_net(r=2.0, c=1e-6, i=0.5):
    return netlist(3, [(V, 1, 0, 1.0, "s"), (R, 1, 2, r, "r"), (C, 2, 0, c, "c"),
                       (I, 2, 0, i, "load")], fd={2})


def test_rc_current_step_matches_closed_form():
    r, c, i = 2.0, 1e-6, 0.5
    tau = r * c
    dt = tau / 100
    # A ramp much shorter than one step behaves as a step.
    loads = LoadModel(i, step_fraction=1.0, rise_time=dt * 1e-3)
    tr = solve_transient(rc_net(r, c, i), loads, dt=dt, horizon=5 * tau, probes=[2])
    drop = 1.0 - tr.waveforms[:, 0]
    exact = i * r * (1 - np.exp(-tr.time_axis / tau))
    assert np.max(np.abs(drop - exact)) / (i * r) < 0.005
    late = tr.time_axis >= tau
    assert np.max(np.abs(drop[late] - exact[late]) / exact[late]) < 0.005


def test_rl_ramp_inductor_drop():
    l_h, i, rise = 5e-9, 10.0, 1e-6
    net = netlist(4, [(V, 1, 0, 1.0, "s"), (R, 1, 2, 0.01, "r"), (L, 2, 3, l_h, "l"),
                      (I, 3, 0, i, "load")], fd={3})
    loads = LoadModel(i, step_fraction=0.8, rise_time=rise)
    tr = solve_transient(net, loads, probes=[2, 3])
    vl = tr.waveforms[:, 0] - tr.waveforms[:, 1]
    during = (tr.time_axis > 0.1 * rise) & (tr.time_axis < 0.9 * rise)
    expected = l_h * 0.8 * i / rise
    assert np.max(np.abs(vl[during] / expected - 1)) < 0.01
    after = tr.time_axis > 1.1 * rise
    assert np.max(np.abs(vl[after])) < 1e-3 * expected


def test_flat_load_stays_at_dc():
    loads = LoadModel(0.5, step_fraction=0.0, rise_time=1e-7)
    tr = solve_transient(rc_net(), loads, probes=[2])
    assert np.max(np.abs(tr.waveforms[:, 0] - tr.v_dc_post[0])) < 1e-12


def test_transient_starts_at_dc_and_converges():
    r, c = 2.0, 1e-9
    loads = LoadModel(0.1, step_fraction=0.8, rise_time=1e-10)
    tr = solve_transient(rc_net(r, c, 0.1), loads, horizon=50 * r * c, probes=[2])
    dc_pre = solve_dc(rc_net(r, c, 0.1), load_scale=0.2).node_voltages[2]
    assert tr.waveforms[0, 0] == pytest.approx(dc_pre, abs=1e-14)
    assert abs(tr.waveforms[-1, 0] - tr.v_dc_post[0]) < 1e-4 * tr.v_dc_post[0]
    assert tr.worst_droop >= 0
    assert np.all(tr.undershoot >= 0)


def test_rlc_undershoot_detected():
    # Underdamped series RLC: the load step rings below the final DC level.
    net = netlist(4, [(V, 1, 0, 1.0, "s"), (R, 1, 2, 1e-3, "r"), (L, 2, 3, 1e-9, "l"),
                      (C, 3, 0, 1e-6, "c"), (I, 3, 0, 1.0, "load")], fd={3})
    loads = LoadModel(1.0, step_fraction=1.0, rise_time=1e-9)
    tr = solve_transient(net, loads, dt=1e-10, horizon=2e-6)
    # Ring amplitude of an ideal LC step response: I * sqrt(L/C)
    z0 = math.sqrt(1e-9 / 1e-6)
    assert tr.undershoot[0] == pytest.approx(z0, rel=0.1)
    assert tr.dynamic_energy > 0


def test_transient_argument_checks():
    loads = LoadModel(1.0, 0.5, 1e-9)
    with pytest.raises(DomainError):
        solve_transient(rc_net(), loads, dt=0)
    with pytest.raises(DomainError):
        solve_transient(rc_net(), loads, horizon=5e-9)
    with pytest.raises(DomainError):
        LoadModel(1.0, step_fraction=1.5)
    with pytest.raises(DomainError):
        LoadModel(1.0, rise_time=0)


def test_load_model_scale():
    m = LoadModel(1.0, step_fraction=0.8, rise_time=2.0)
    assert m.scale(-1) == pytest.approx(0.2)
    assert m.scale(1.0) == pytest.approx(0.6)
    assert m.scale(5.0) == pytest.approx(1.0)

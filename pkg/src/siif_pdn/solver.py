"""Sparse modified nodal analysis: DC operating point and load-step transient.

Unknowns are the non-ground node voltages followed by one branch current
per voltage source and per inductor. The system is ``C x' + G x = b(t)``;
inductors are shorts at DC and capacitors are open.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError, TopologyError
from .netlist import BranchKind, PdnNetlist

log = logging.getLogger(__name__)


@dataclass
class MnaSystem:
    dimension: int
    n_nodes: int                 # non-ground nodes
    conductance: sp.csc_matrix   # G
    storage: sp.csc_matrix       # C (capacitors and -L on inductor rows)
    excitation: np.ndarray       # b with every current source at its netlist value
    source_part: np.ndarray      # part of b from voltage sources (not scaled by load)
    load_part: np.ndarray        # part of b from current sources
    aux_index: dict[int, int]    # branch index -> unknown index for V and L branches


@dataclass
class SolveResult:
    node_voltages: np.ndarray    # indexed by node, ground included
    branch_currents: np.ndarray  # from node a to node b through the element
    solve_stats: dict = field(default_factory=dict)


@dataclass
class LoadModel:
    """Load-step stimulus: every current source ramps from (1 - step_fraction)
    of its value to its full value over ``rise_time``."""

    dc_current: float
    step_fraction: float = 0.8
    rise_time: float = 1e-9

    def __post_init__(self):
        if not self.dc_current > 0:
            raise DomainError("dc_current must be > 0")
        if not 0.0 <= self.step_fraction <= 1.0:
            raise DomainError("step_fraction must lie in [0, 1]")
        if not self.rise_time > 0:
            raise DomainError("rise_time must be > 0")

    @classmethod
    def for_dielet(cls, dielet, step_fraction: float = 0.8) -> LoadModel:
        return cls(dielet.load_current_a, step_fraction, 1.0 / (dielet.frequency_ghz * 1e9))

    def scale(self, t: np.ndarray | float):
        s0 = 1.0 - self.step_fraction
        return s0 + self.step_fraction * np.clip(np.asarray(t, dtype=float) / self.rise_time, 0.0, 1.0)


@dataclass
class TransientResult:
    time_axis: np.ndarray
    probes: list[int]
    waveforms: np.ndarray        # shape (len(time_axis), len(probes))
    v_no_load: np.ndarray        # per probe
    v_dc_pre: np.ndarray
    v_dc_post: np.ndarray
    worst_droop: float
    worst_probe: int
    settle_time: float
    dynamic_energy: float        # J, dissipation of the non-quasi-static current
    steps: int

    @property
    def undershoot(self) -> np.ndarray:
        """Per-probe worst excursion below the post-step DC level (>= 0)."""
        return np.maximum((self.v_dc_post[None, :] - self.waveforms).max(axis=0), 0.0)


def check_connectivity(netlist: PdnNetlist) -> None:
    """Raise TopologyError unless every node has a DC path (R, L or V) to ground."""
    n = len(netlist.nodes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for b in netlist.branches:
        if b.kind in (BranchKind.R, BranchKind.L, BranchKind.VSOURCE):
            ra, rb = find(b.a), find(b.b)
            if ra != rb:
                parent[ra] = rb
    ground = find(0)
    floating = [i for i in range(1, n) if find(i) != ground]
    if not floating:
        return
    loads = {b.a for b in netlist.branches if b.kind is BranchKind.ISOURCE} | \
            {b.b for b in netlist.branches if b.kind is BranchKind.ISOURCE}
    node = next((i for i in floating if i in loads), floating[0])
    what = "load node" if node in loads else "node"
    raise TopologyError(f"{what} n{node} ({netlist.nodes[node].label}) is floating: "
                        f"no resistive or source path to ground")


def assemble_mna(netlist: PdnNetlist) -> MnaSystem:
    check_connectivity(netlist)
    n_nodes = len(netlist.nodes) - 1
    aux_index: dict[int, int] = {}
    for i, b in enumerate(netlist.branches):
        if b.kind in (BranchKind.VSOURCE, BranchKind.L):
            aux_index[i] = n_nodes + len(aux_index)
    dim = n_nodes + len(aux_index)
    if dim == 0:
        raise TopologyError("empty netlist")

    gr, gc, gv = [], [], []
    cr, cc, cv = [], [], []
    src = np.zeros(dim)
    load = np.zeros(dim)

    def stamp2(rows, cols, vals, a, b, v):
        # Symmetric two-terminal stamp; node k maps to unknown k-1.
        for p, q, s in ((a, a, v), (b, b, v), (a, b, -v), (b, a, -v)):
            if p and q:
                rows.append(p - 1)
                cols.append(q - 1)
                vals.append(s)

    for i, b in enumerate(netlist.branches):
        if b.kind is BranchKind.R:
            stamp2(gr, gc, gv, b.a, b.b, 1.0 / b.value)
        elif b.kind is BranchKind.C:
            stamp2(cr, cc, cv, b.a, b.b, b.value)
        elif b.kind is BranchKind.ISOURCE:
            if b.a:
                load[b.a - 1] -= b.value
            if b.b:
                load[b.b - 1] += b.value
        else:
            k = aux_index[i]
            for node, sign in ((b.a, 1.0), (b.b, -1.0)):
                if node:
                    gr += [node - 1, k]
                    gc += [k, node - 1]
                    gv += [sign, sign]
            if b.kind is BranchKind.VSOURCE:
                src[k] = b.value
            else:
                cr.append(k)
                cc.append(k)
                cv.append(-b.value)

    G = sp.csc_matrix((gv, (gr, gc)), shape=(dim, dim))
    C = sp.csc_matrix((cv, (cr, cc)), shape=(dim, dim))
    G.sum_duplicates()
    C.sum_duplicates()
    return MnaSystem(dim, n_nodes, G, C, src + load, src, load, aux_index)


def _factor(matrix: sp.csc_matrix, netlist: PdnNetlist):
    try:
        return spla.splu(matrix, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise NumericalError(f"singular MNA matrix ({exc}); check for voltage-source "
                             f"or inductor loops") from exc


def _branch_currents(netlist: PdnNetlist, sys: MnaSystem, x: np.ndarray, load_scale) -> np.ndarray:
    v = np.concatenate([[0.0], x[:sys.n_nodes]])
    out = np.zeros(len(netlist.branches))
    for i, b in enumerate(netlist.branches):
        if b.kind is BranchKind.R:
            out[i] = (v[b.a] - v[b.b]) / b.value
        elif b.kind is BranchKind.ISOURCE:
            out[i] = b.value * load_scale
        elif i in sys.aux_index:
            out[i] = x[sys.aux_index[i]]
    return out


def solve_dc(netlist: PdnNetlist, load_scale: float = 1.0, system: MnaSystem | None = None) -> SolveResult:
    """DC operating point with every current source multiplied by ``load_scale``."""
    sys = system or assemble_mna(netlist)
    t0 = time.perf_counter()
    lu = _factor(sys.conductance, netlist)
    t1 = time.perf_counter()
    x = lu.solve(sys.source_part + load_scale * sys.load_part)
    if not np.all(np.isfinite(x)):
        raise NumericalError("DC solve produced non-finite values")
    v = np.concatenate([[0.0], x[:sys.n_nodes]])
    stats = {
        "unknowns": sys.dimension,
        "nnz": int(sys.conductance.nnz),
        "fill_in": int(lu.L.nnz + lu.U.nnz - sys.conductance.nnz),
        "factor_time": t1 - t0,
        "iterations": 1,
    }
    return SolveResult(v, _branch_currents(netlist, sys, x, load_scale), stats)


def kcl_residual(netlist: PdnNetlist, result: SolveResult) -> np.ndarray:
    """Net current leaving each node (ground excluded); zero for an exact solve."""
    res = np.zeros(len(netlist.nodes))
    for b, i in zip(netlist.branches, result.branch_currents):
        res[b.a] += i
        res[b.b] -= i
    return res[1:]


def power_balance(result: SolveResult, netlist: PdnNetlist) -> dict[str, float]:
    """Source power, current-sink power and I^2R loss of a DC solution.

    ``load_power`` covers every current sink, so ``source_power = load_power
    + resistive_loss`` up to round-off. It is split into ``fd_load_power``
    (dielet loads) and ``sink_power`` (converter input draws).
    """
    v = result.node_voltages
    fd = set(netlist.fd_nodes)
    source = load = sink = loss = 0.0
    for b, i in zip(netlist.branches, result.branch_currents):
        if b.kind is BranchKind.VSOURCE:
            source -= b.value * i
        elif b.kind is BranchKind.ISOURCE:
            p = (v[b.a] - v[b.b]) * i
            if b.a in fd:
                load += p
            else:
                sink += p
        elif b.kind is BranchKind.R:
            loss += b.value * i * i
    return {"source_power": source, "load_power": load + sink, "fd_load_power": load,
            "sink_power": sink, "resistive_loss": loss}


def _resistor_incidence(netlist: PdnNetlist, n_nodes: int):
    rows, cols, vals, res = [], [], [], []
    for b in netlist.branches:
        if b.kind is not BranchKind.R:
            continue
        k = len(res)
        for node, s in ((b.a, 1.0), (b.b, -1.0)):
            if node:
                rows.append(k)
                cols.append(node - 1)
                vals.append(s)
        res.append(b.value)
    res = np.asarray(res)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(res), max(n_nodes, 1)))
    return A, res


def solve_transient(netlist: PdnNetlist, loads: LoadModel, dt: float | None = None,
                    horizon: float | None = None, probes: list[int] | None = None) -> TransientResult:
    """Fixed-step trapezoidal integration of a load step from the pre-step DC point.

    The step containing each stimulus breakpoint (ramp start and end) is
    taken with backward Euler to avoid trapezoidal ringing on algebraic
    inductor currents; every other step is trapezoidal.
    """
    dt = loads.rise_time / 50.0 if dt is None else dt
    horizon = 10.0 * loads.rise_time if horizon is None else horizon
    if not dt > 0:
        raise DomainError("dt must be > 0")
    if horizon < 10.0 * loads.rise_time * (1 - 1e-12):
        raise DomainError("horizon must be at least 10 rise times")

    sys = assemble_mna(netlist)
    n = sys.n_nodes
    if probes is None:
        probes = netlist.fd_nodes or list(range(1, len(netlist.nodes)))
    probe_idx = np.asarray(probes, dtype=int) - 1

    lu_dc = _factor(sys.conductance, netlist)
    x_noload = lu_dc.solve(sys.source_part)
    x_full = lu_dc.solve(sys.source_part + sys.load_part)
    s0 = float(loads.scale(0.0))
    x = x_noload + s0 * (x_full - x_noload)

    steps = int(np.ceil(horizon / dt - 1e-9))
    times = np.arange(steps + 1) * dt
    scales = loads.scale(times)
    # Step k (from t_k to t_{k+1}) is a breakpoint step if it contains a ramp edge.
    edges = (0.0, loads.rise_time)
    be_steps = {k for k in range(steps)
                for e in edges if times[k] <= e < times[k + 1] or (k == 0 and e == 0.0)}

    G, C = sys.conductance, sys.storage
    lu_tr = _factor((G + (2.0 / dt) * C).tocsc(), netlist)
    lu_be = _factor((G + (1.0 / dt) * C).tocsc(), netlist)
    M_tr = ((2.0 / dt) * C - G).tocsr()
    C_be = ((1.0 / dt) * C).tocsr()

    A_r, r_vals = _resistor_incidence(netlist, n)
    i_r_noload = (A_r @ x_noload[:n]) / r_vals
    i_r_delta = (A_r @ x_full[:n]) / r_vals - i_r_noload

    def dynamic_power(xk, s):
        dev = (A_r @ xk[:n]) / r_vals - (i_r_noload + s * i_r_delta)
        return float(np.dot(r_vals, dev * dev))

    waves = np.empty((steps + 1, len(probe_idx)))
    waves[0] = x[probe_idx]
    p_prev = dynamic_power(x, scales[0])
    energy = 0.0
    for k in range(steps):
        b_next = sys.source_part + scales[k + 1] * sys.load_part
        if k in be_steps:
            x = lu_be.solve(C_be @ x + b_next)
        else:
            b_now = sys.source_part + scales[k] * sys.load_part
            x = lu_tr.solve(M_tr @ x + b_now + b_next)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"transient diverged at step {k + 1} (t = {times[k + 1]:.4g} s)")
        waves[k + 1] = x[probe_idx]
        p_now = dynamic_power(x, scales[k + 1])
        energy += 0.5 * dt * (p_prev + p_now)
        p_prev = p_now

    v_noload = x_noload[probe_idx]
    v_pre = x_noload[probe_idx] + s0 * (x_full - x_noload)[probe_idx]
    v_post = x_full[probe_idx]
    droop = v_noload[None, :] - waves
    worst = float(max(droop.max(), 0.0))
    worst_probe = int(probes[int(np.unravel_index(np.argmax(droop), droop.shape)[1])])
    swing = np.maximum(np.abs(v_post - v_pre), 1e-300)
    outside = np.abs(waves - v_post[None, :]) > 0.02 * swing[None, :]
    late = np.nonzero(outside.any(axis=1))[0]
    settle = float(times[late[-1]]) if late.size else 0.0
    return TransientResult(times, list(probes), waves, v_noload, v_pre, v_post, worst,
                           worst_probe, settle, energy, steps)

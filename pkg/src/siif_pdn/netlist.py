"""PDN graph construction for the five topologies and the interchange text format.

A netlist is a flat list of two-terminal branches between indexed nodes;
node 0 is ground. Current-source branches carry the dielet loads and the
input currents of converters. Converters are behavioral: an ideal voltage
source at the output voltage behind the converter output resistance, with
the input side drawing ``P_out / (efficiency * V_in)`` as a fixed sink.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from enum import Enum

from .errors import BuildError, ParseError
from .floorplan import Floorplan, TopologyConfig
from .parasitics import (ExtractionParams, Parasitic, decap_bank, grid_sheet_resistance,
                         mesh_segment)
from .platform import ApplicationSpec, DecapLocation, DecapStage, TopologyKind

DEFAULT_GRID_GRANULARITY = 32
PT_UD_SHARE = 24  # one UD-equivalent of on-die decap per this many FDs in PT


class NodeRole(str, Enum):
    GROUND = "GROUND"
    SOURCE = "SOURCE"
    PCB = "PCB"
    BACKSIDE = "BACKSIDE"
    TOPSIDE_GRID = "TOPSIDE_GRID"
    UD = "UD"
    FD = "FD"
    INTERNAL = "INTERNAL"


class BranchKind(str, Enum):
    R = "R"
    L = "L"
    C = "C"
    VSOURCE = "V"
    ISOURCE = "I"


@dataclass(frozen=True)
class Node:
    label: str
    role: NodeRole


@dataclass(frozen=True)
class Branch:
    """Two-terminal element from node ``a`` to node ``b``.

    For a voltage source ``value = V(a) - V(b)``; for a current source
    ``value`` amperes flow from ``a`` through the source into ``b``.
    """

    kind: BranchKind
    a: int
    b: int
    value: float
    label: str


@dataclass(frozen=True)
class Converter:
    source: str          # label of the ideal output voltage source
    sink: str | None     # label of the input-side current sink
    efficiency: float
    stage: str           # "pol" or "intermediate"
    input_voltage: float | None = None


@dataclass(frozen=True)
class PdnNetlist:
    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    converters: tuple[Converter, ...] = ()
    decap_sites: tuple[tuple[int, DecapLocation], ...] = ()
    supply_voltage: float | None = None
    ground_node: int = 0

    def nodes_with_role(self, role: NodeRole) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.role is role]

    @property
    def fd_nodes(self) -> list[int]:
        return self.nodes_with_role(NodeRole.FD)

    def branches_of(self, kind: BranchKind) -> list[Branch]:
        return [b for b in self.branches if b.kind is kind]

    def load_branches(self) -> list[Branch]:
        fd = set(self.fd_nodes)
        return [b for b in self.branches if b.kind is BranchKind.ISOURCE and b.a in fd]

    def branch_index(self) -> dict[str, int]:
        return {(b.kind.value + b.label): i for i, b in enumerate(self.branches)}


class _Builder:
    def __init__(self):
        self.nodes: list[Node] = [Node("gnd", NodeRole.GROUND)]
        self.branches: list[Branch] = []
        self.converters: list[Converter] = []
        self.sites: list[tuple[int, DecapLocation]] = []

    def node(self, label: str, role: NodeRole, site: DecapLocation | None = None) -> int:
        self.nodes.append(Node(label, role))
        idx = len(self.nodes) - 1
        if site is not None:
            self.sites.append((idx, site))
        return idx

    def add(self, kind: BranchKind, a: int, b: int, value: float, label: str):
        if a == b:
            raise BuildError(f"branch {label} has both ends on node {a}")
        if kind is BranchKind.R and not value > 0:
            raise BuildError(f"resistor {label} must be > 0, got {value}")
        self.branches.append(Branch(kind, a, b, float(value), label))

    def rl(self, a: int, b: int, par: Parasitic, label: str):
        """Series R then L from ``a`` to ``b`` (L omitted when zero)."""
        if par.inductance > 0:
            mid = self.node(label + "_m", NodeRole.INTERNAL)
            self.add(BranchKind.R, a, mid, par.resistance, label)
            self.add(BranchKind.L, mid, b, par.inductance, label)
        else:
            self.add(BranchKind.R, a, b, par.resistance, label)

    def converter(self, label: str, out: int, v_out: float, r_out: float, efficiency: float,
                  v_in: float | None, in_node: int | None, i_out_nominal: float, stage: str = "pol"):
        if r_out > 0:
            src = self.node(label + "_src", NodeRole.SOURCE)
            self.add(BranchKind.VSOURCE, src, 0, v_out, label)
            self.add(BranchKind.R, src, out, r_out, label + "_out")
        else:
            self.add(BranchKind.VSOURCE, out, 0, v_out, label)
        sink = None
        if in_node is not None:
            sink = label + "_in"
            self.add(BranchKind.ISOURCE, in_node, 0, v_out * i_out_nominal / (efficiency * v_in), sink)
        self.converters.append(Converter(label, sink, efficiency, stage, v_in))

    def build(self, supply_voltage: float) -> PdnNetlist:
        return PdnNetlist(tuple(self.nodes), tuple(self.branches), tuple(self.converters),
                          tuple(self.sites), supply_voltage)


def _sector(pos: tuple[float, float], sectors: int) -> int:
    angle = math.atan2(pos[1], pos[0]) % (2 * math.pi)
    return min(int(angle / (2 * math.pi / sectors)), sectors - 1)


def _fd_stack(bld: _Builder, top: int, i: int, load: float, pillar: Parasitic) -> int:
    fd = bld.node(f"fd{i}", NodeRole.FD, DecapLocation.FD_INTERNAL)
    bld.rl(top, fd, pillar, f"fd{i}_pil")
    bld.add(BranchKind.ISOURCE, fd, 0, load, f"fd{i}_load")
    return fd


def _build_pt(bld, topo, app, plan, ext, sectors):
    v_pol = app.dielet.supply_voltage_v
    i_fd = app.dielet.load_current_a
    feats, rho = ext.features, ext.rho
    rs = grid_sheet_resistance(feats, rho)
    ring = plan.ring_inner_radius_mm * 1e-3
    theta = 2 * math.pi / sectors
    bins = sectors
    edges = [ring * math.sqrt(1 - j / bins) for j in range(bins + 1)]
    radii = [ring * math.sqrt(1 - (j + 0.5) / bins) for j in range(bins)]
    pillar = ext.pillar().parallel(ext.pillars_for(app.dielet.area_mm2))
    vin = bld.node("vin", NodeRole.SOURCE)
    bld.add(BranchKind.VSOURCE, vin, 0, app.input_voltage_v, "vin")
    i_total = plan.fd_count * i_fd

    grid = [[0] * bins for _ in range(sectors)]
    for k in range(sectors):
        rk = bld.node(f"ring{k}", NodeRole.TOPSIDE_GRID, DecapLocation.WAFER_TOPSIDE)
        bld.converter(f"pt{k}", rk, v_pol, topo.converter_output_resistance,
                      topo.converter_efficiency, app.input_voltage_v, vin, i_total / sectors)
        prev, prev_r = rk, ring
        for j in range(bins):
            g = bld.node(f"g{k}_{j}", NodeRole.TOPSIDE_GRID, DecapLocation.UD_INTERNAL)
            seg = mesh_segment(prev_r - radii[j], 0.5 * (prev_r + radii[j]) * theta, feats, rho)
            seg = replace(seg, resistance=rs * math.log(prev_r / radii[j]) / theta)
            bld.rl(prev, g, seg, f"g{k}_{j}_rad")
            grid[k][j] = g
            prev, prev_r = g, radii[j]
    for k in range(sectors):
        k2 = (k + 1) % sectors
        if k2 == k:
            break
        for j in range(bins):
            r_link = rs * radii[j] * theta / (edges[j] - edges[j + 1])
            bld.add(BranchKind.R, grid[k][j], grid[k2][j], r_link, f"g{k}_{j}_ang")

    for i, pos in enumerate(plan.fd_positions):
        r = math.hypot(*pos) * 1e-3
        j = min(bins - 1, int(bins * (1 - (r / ring) ** 2)))
        _fd_stack(bld, grid[_sector(pos, sectors)][j], i, i_fd, pillar)


def _build_backside(bld, topo, app, plan, ext, sectors, two_stage: bool):
    v_pol = app.dielet.supply_voltage_v
    i_fd = app.dielet.load_current_a
    v_mid = app.intermediate_voltage_v
    pillar = ext.pillar().parallel(ext.pillars_for(app.dielet.area_mm2))
    twv = ext.twv().parallel(ext.twv_per_dielet)
    spread = ext.plane_spreading()
    vin = bld.node("vin", NodeRole.SOURCE)
    bld.add(BranchKind.VSOURCE, vin, 0, app.input_voltage_v, "vin")

    members = defaultdict(list)
    for i, pos in enumerate(plan.fd_positions):
        members[_sector(pos, sectors)].append(i)
    pins = ext.pin_count()
    pcb, back, pol = [], [], []
    for k in range(sectors):
        n_fd = len(members[k])
        p = bld.node(f"pcb{k}", NodeRole.PCB, DecapLocation.PCB)
        b = bld.node(f"bs{k}", NodeRole.BACKSIDE, None if two_stage else DecapLocation.WAFER_BACKSIDE)
        if two_stage:
            # 48/12 on the PCB, pins at 12 V, then a 12/1 stage per sector on the backside.
            i_mid = n_fd * v_pol * i_fd / (topo.converter_efficiency * v_mid)
            bld.converter(f"pcb{k}", p, v_mid, topo.converter_output_resistance,
                          topo.intermediate_efficiency, app.input_voltage_v, vin, i_mid,
                          stage="intermediate")
        else:
            bld.converter(f"pcb{k}", p, v_pol, topo.converter_output_resistance,
                          topo.converter_efficiency, app.input_voltage_v, vin, n_fd * i_fd)
        n_pins = pins // sectors + (1 if k < pins % sectors else 0)
        bld.rl(p, b, ext.pin().parallel(max(n_pins, 1)), f"pins{k}")
        if two_stage:
            o = bld.node(f"pol{k}", NodeRole.BACKSIDE, DecapLocation.WAFER_BACKSIDE)
            bld.converter(f"bsc{k}", o, v_pol, topo.converter_output_resistance,
                          topo.converter_efficiency, v_mid, b, n_fd * i_fd)
            b2 = o
        else:
            b2 = b
        pcb.append(p)
        back.append(b)
        pol.append(b2)
    if sectors > 1:
        for k in range(sectors):
            k2 = (k + 1) % sectors
            if sectors == 2 and k == 1:
                break
            bld.add(BranchKind.R, pcb[k], pcb[k2], spread, f"pcb{k}_plane")
            bld.add(BranchKind.R, back[k], back[k2], spread, f"bs{k}_plane")
            if two_stage:
                bld.add(BranchKind.R, pol[k], pol[k2], spread, f"pol{k}_plane")

    for k in range(sectors):
        for i in members[k]:
            s = bld.node(f"bs{k}_fd{i}", NodeRole.BACKSIDE)
            bld.add(BranchKind.R, pol[k], s, spread, f"fd{i}_spread")
            t = bld.node(f"top{i}", NodeRole.TOPSIDE_GRID, DecapLocation.WAFER_TOPSIDE)
            bld.rl(s, t, twv, f"fd{i}_twv")
            _fd_stack(bld, t, i, i_fd, pillar)


def _build_bt2(bld, topo, app, plan, ext, sectors):
    v_pol = app.dielet.supply_voltage_v
    i_fd = app.dielet.load_current_a
    feats, rho = ext.features, ext.rho
    pillar = ext.pillar().parallel(ext.pillars_for(app.dielet.area_mm2))
    twv = ext.twv().parallel(ext.twv_per_dielet)
    bga = ext.bga().parallel(ext.bga_per_tile)
    spread = ext.plane_spreading()
    hop = mesh_segment(plan.cell_mm * 1e-3, plan.dielet_side_mm * 1e-3, feats, rho)
    vin = bld.node("vin", NodeRole.SOURCE)
    bld.add(BranchKind.VSOURCE, vin, 0, app.input_voltage_v, "vin")
    pcb = []
    for k in range(sectors):
        p = bld.node(f"pcb{k}", NodeRole.PCB, DecapLocation.PCB)
        bld.add(BranchKind.R, vin, p, spread, f"pcb{k}_feed")
        pcb.append(p)

    for u, tile in enumerate(plan.tiles):
        if tile.ud_position is None:
            raise BuildError("BT2 floorplan tile without a UD")
        p = pcb[_sector(tile.ud_position, sectors)]
        b = bld.node(f"ud{u}_bs", NodeRole.BACKSIDE)
        bld.rl(p, b, bga, f"ud{u}_bga")
        ui = bld.node(f"ud{u}_in", NodeRole.UD)
        bld.rl(b, ui, twv, f"ud{u}_twv")
        uo = bld.node(f"ud{u}", NodeRole.UD, DecapLocation.UD_INTERNAL)
        bld.converter(f"ud{u}", uo, v_pol, topo.converter_output_resistance,
                      topo.converter_efficiency, app.input_voltage_v, ui, len(tile.fd_indices) * i_fd)
        for i in tile.fd_indices:
            h = bld.node(f"top{i}", NodeRole.TOPSIDE_GRID, DecapLocation.WAFER_TOPSIDE)
            n_hops = max(plan.fd_hops[i], 1)
            bld.rl(uo, h, Parasitic(hop.resistance * n_hops, hop.inductance * n_hops), f"fd{i}_hop")
            _fd_stack(bld, h, i, i_fd, pillar)


def default_decap_areas(kind: TopologyKind, plan: Floorplan, app: ApplicationSpec,
                        wafer_area_mm2: float) -> dict[DecapLocation, float]:
    """Total decap area (mm^2) per hierarchy location."""
    die = app.dielet.area_mm2
    areas = {
        DecapLocation.PCB: wafer_area_mm2,
        DecapLocation.WAFER_BACKSIDE: wafer_area_mm2,
        DecapLocation.WAFER_TOPSIDE: plan.fd_count * die,
        DecapLocation.UD_INTERNAL: plan.ud_count * die,
        DecapLocation.FD_INTERNAL: plan.fd_count * die,
    }
    if kind is TopologyKind.PT:
        areas[DecapLocation.WAFER_TOPSIDE] = 0.30 * wafer_area_mm2
        areas[DecapLocation.UD_INTERNAL] = math.ceil(plan.fd_count / PT_UD_SHARE) * die
    return areas


def insert_decaps(netlist: PdnNetlist, stages: list[DecapStage],
                  areas: dict[DecapLocation, float], density_point: float = 0.5) -> PdnNetlist:
    """Hang one series ESR-ESL-C bank to ground at every site of each stage.

    The stage's total area is split evenly over its sites. The input
    netlist is not modified.
    """
    if not stages:
        return netlist
    bld = _Builder()
    bld.nodes = list(netlist.nodes)
    bld.branches = list(netlist.branches)
    bld.converters = list(netlist.converters)
    bld.sites = list(netlist.decap_sites)
    for stage in stages:
        sites = [n for n, loc in netlist.decap_sites if loc is stage.location]
        if not sites:
            raise BuildError(f"netlist has no {stage.location.value} site for decaps")
        area = areas.get(stage.location)
        if area is None or not area > 0:
            raise BuildError(f"no decap area given for {stage.location.value}")
        bank = decap_bank(area / len(sites), stage, density_point)
        tag = stage.location.value.lower()
        for n in sites:
            label = f"dc_{tag}_{bld.nodes[n].label}"
            m1 = bld.node(label + "_c", NodeRole.INTERNAL)
            if bank.inductance > 0:
                m2 = bld.node(label + "_l", NodeRole.INTERNAL)
                bld.add(BranchKind.R, n, m2, bank.resistance, label)
                bld.add(BranchKind.L, m2, m1, bank.inductance, label)
            else:
                bld.add(BranchKind.R, n, m1, bank.resistance, label)
            bld.add(BranchKind.C, m1, 0, bank.capacitance, label)
    return PdnNetlist(tuple(bld.nodes), tuple(bld.branches), netlist.converters,
                      netlist.decap_sites, netlist.supply_voltage)


def build_pdn(topology: TopologyConfig, app: ApplicationSpec, plan: Floorplan,
              extraction: ExtractionParams, grid_granularity: int = DEFAULT_GRID_GRANULARITY,
              density_point: float = 0.5, with_decaps: bool = True) -> PdnNetlist:
    """Full PDN for one scenario, decap hierarchy included unless ``with_decaps`` is False."""
    from .platform import decap_stages_for

    if plan.topology.kind is not topology.kind:
        raise BuildError(f"floorplan is for {plan.topology.kind.value}, topology is {topology.kind.value}")
    if grid_granularity < 1:
        raise BuildError("grid_granularity must be >= 1")
    bld = _Builder()
    kind = topology.kind
    if kind is TopologyKind.PT:
        if plan.ring_inner_radius_mm is None:
            raise BuildError("PT floorplan lacks a ring radius")
        _build_pt(bld, topology, app, plan, extraction, grid_granularity)
    elif kind in (TopologyKind.BT1, TopologyKind.BT3):
        _build_backside(bld, topology, app, plan, extraction, grid_granularity,
                        two_stage=kind is TopologyKind.BT3)
    else:
        _build_bt2(bld, topology, app, plan, extraction, grid_granularity)
    net = bld.build(app.dielet.supply_voltage_v)
    if with_decaps:
        areas = default_decap_areas(kind, plan, app, extraction.features.wafer_area_mm2)
        net = insert_decaps(net, decap_stages_for(kind), areas, density_point)
    return net


# --------------------------------------------------------------- interchange text

_KIND_BY_LETTER = {k.value: k for k in BranchKind}


def _fmt(value: float) -> str:
    mantissa, exp = f"{value:.11e}".split("e")
    return f"{mantissa}e{int(exp)}"


def _node_name(i: int) -> str:
    return "0" if i == 0 else f"n{i}"


def export_interchange(netlist: PdnNetlist) -> str:
    """SPICE-subset text: node declarations as comments, elements sorted by (kind, label)."""
    lines = ["* siif-pdn interchange netlist"]
    for i, node in enumerate(netlist.nodes[1:], start=1):
        lines.append(f"*node n{i} {node.role.value} {node.label}")
    for b in sorted(netlist.branches, key=lambda b: (b.kind.value, b.label)):
        lines.append(f"{b.kind.value}{b.label} {_node_name(b.a)} {_node_name(b.b)} {_fmt(b.value)}")
    lines.append(".end")
    return "\n".join(lines) + "\n"


def parse_interchange(text: str) -> PdnNetlist:
    """Inverse of :func:`export_interchange`; undeclared nodes become INTERNAL."""
    declared: dict[int, Node] = {}
    branches: list[Branch] = []
    max_node = 0

    def node_id(tok: str, lineno: int) -> int:
        if tok == "0":
            return 0
        if tok.startswith("n") and tok[1:].isdigit() and int(tok[1:]) > 0:
            return int(tok[1:])
        raise ParseError(lineno, f"bad node name {tok!r}")

    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ended:
            raise ParseError(lineno, "content after .end")
        if line.startswith("*node"):
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(lineno, "node declaration needs index, role and label")
            idx = node_id(parts[1], lineno)
            try:
                role = NodeRole(parts[2])
            except ValueError:
                raise ParseError(lineno, f"unknown node role {parts[2]!r}") from None
            declared[idx] = Node(parts[3], role)
            max_node = max(max_node, idx)
            continue
        if line.startswith("*"):
            continue
        if line.lower() == ".end":
            ended = True
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(parts)}")
        name, na, nb, val = parts
        kind = _KIND_BY_LETTER.get(name[0].upper())
        if kind is None or len(name) < 2:
            raise ParseError(lineno, f"unknown element {name!r}")
        a, b = node_id(na, lineno), node_id(nb, lineno)
        if a == b:
            raise ParseError(lineno, "element shorted to itself")
        try:
            value = float(val)
        except ValueError:
            raise ParseError(lineno, f"bad value {val!r}") from None
        if not math.isfinite(value):
            raise ParseError(lineno, f"non-finite value {val!r}")
        if kind is BranchKind.R and not value > 0:
            raise ParseError(lineno, "resistance must be > 0")
        branches.append(Branch(kind, a, b, value, name[1:]))
        max_node = max(max_node, a, b)
    if not ended:
        raise ParseError(len(text.splitlines()) + 1, "missing .end")
    nodes = [Node("gnd", NodeRole.GROUND)]
    for i in range(1, max_node + 1):
        nodes.append(declared.get(i, Node(f"n{i}", NodeRole.INTERNAL)))
    return PdnNetlist(tuple(nodes), tuple(branches))

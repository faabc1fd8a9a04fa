"""End-to-end scenario pipeline: floorplan -> netlist -> DC + transient -> FOM report."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import metrics
from .floorplan import Floorplan, TopologyConfig, fd_count, place_dielets
from .netlist import DEFAULT_GRID_GRANULARITY, PdnNetlist, build_pdn
from .parasitics import ExtractionParams
from .platform import (BUILTIN_APPS, ApplicationSpec, PlatformFeatures, TopologyKind,
                       builtin_application, validate, validate_application)
from .solver import (LoadModel, SolveResult, TransientResult, assemble_mna, power_balance,
                     solve_dc, solve_transient)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    app: ApplicationSpec
    topology: TopologyConfig
    extraction: ExtractionParams = ExtractionParams()
    density_point: float = 0.5
    grid_granularity: int = DEFAULT_GRID_GRANULARITY
    step_fraction: float = 0.8
    dt: float | None = None
    horizon: float | None = None
    transient: bool = True

    @property
    def features(self) -> PlatformFeatures:
        return self.extraction.features

    @classmethod
    def builtin(cls, app: str, kind: TopologyKind | str, **kw) -> Scenario:
        return cls(app=builtin_application(app), topology=TopologyConfig.default(kind), **kw)


@dataclass
class ScenarioRun:
    scenario: Scenario
    floorplan: Floorplan
    netlist: PdnNetlist
    dc: SolveResult
    transient: TransientResult | None
    report: metrics.FomReport
    balance: dict = field(default_factory=dict)


def balance_converter_inputs(netlist: PdnNetlist, passes: int = 3) -> PdnNetlist:
    """Set every converter input sink to the converter's solved output power.

    Sinks are built from nominal load power; this repeats the DC solve so
    each sink draws ``P_out / (efficiency * V_in)`` including downstream
    network loss. One pass per conversion stage is enough.
    """
    if not any(c.sink for c in netlist.converters):
        return netlist
    system = assemble_mna(netlist)
    for _ in range(passes):
        dc = solve_dc(netlist, system=system)
        idx = netlist.branch_index()
        branches = list(netlist.branches)
        for conv in netlist.converters:
            if conv.sink is None:
                continue
            k_src = idx["V" + conv.source]
            k_sink = idx["I" + conv.sink]
            p_out = -branches[k_src].value * dc.branch_currents[k_src]
            sink = branches[k_sink]
            branches[k_sink] = replace(sink, value=max(p_out, 0.0) / (conv.efficiency * conv.input_voltage))
        netlist = replace(netlist, branches=tuple(branches))
        system = assemble_mna(netlist)
    return netlist


def conversion_loss(netlist: PdnNetlist, dc: SolveResult) -> float:
    idx = netlist.branch_index()
    total = 0.0
    for conv in netlist.converters:
        k = idx["V" + conv.source]
        p_out = -netlist.branches[k].value * dc.branch_currents[k]
        total += max(p_out, 0.0) * (1.0 / conv.efficiency - 1.0)
    return total


def _input_power(netlist: PdnNetlist, dc: SolveResult) -> float:
    idx = netlist.branch_index()
    k = idx.get("Vvin")
    if k is None:
        return float("nan")
    return -netlist.branches[k].value * dc.branch_currents[k]


def _flags(sc: Scenario, n_fd: int, power: float, perf: float) -> list[str]:
    # Published values only describe the unmodified builtin setups.
    if sc.app.name not in BUILTIN_APPS or sc.app != builtin_application(sc.app.name):
        return []
    if sc.features != PlatformFeatures():
        return []
    return metrics.published_flags(sc.app.name, sc.topology.kind, n_fd, power, perf,
                                   sc.app.dielet.effective_tdp_w)


def run_scenario(sc: Scenario) -> ScenarioRun:
    validate(sc.features)
    validate_application(sc.app)
    dielet = sc.app.dielet
    kind = sc.topology.kind
    plan = place_dielets(sc.features, sc.app, sc.topology)
    net = build_pdn(sc.topology, sc.app, plan, sc.extraction, sc.grid_granularity, sc.density_point)
    net = balance_converter_inputs(net)
    dc = solve_dc(net)
    balance = power_balance(dc, net)

    fd_nodes = net.fd_nodes
    drops = metrics.fd_drops(dielet.supply_voltage_v, dc.node_voltages[fd_nodes])
    tr = None
    droop = 0.0
    dyn_loss = 0.0
    if sc.transient:
        loads = LoadModel.for_dielet(dielet, sc.step_fraction)
        tr = solve_transient(net, loads, sc.dt, sc.horizon, probes=fd_nodes)
        droop = float(tr.undershoot.max())
        dyn_loss = tr.dynamic_energy * sc.topology.converter_switching_frequency

    n_fd = fd_count(kind, dielet.area_mm2, sc.features.wafer_area_mm2)
    power = metrics.delivered_power(n_fd, dielet.effective_tdp_w)
    perf = metrics.computing_performance(n_fd, dielet.throughput_tflops)
    report = metrics.FomReport(
        topology=kind, app=sc.app.name, fd_count=n_fd, delivered_power=power,
        computing_performance=perf, dc_drop_worst=float(drops.max()),
        inductive_droop_worst=droop, resistive_loss=balance["resistive_loss"],
        inductive_loss=dyn_loss, conversion_loss=conversion_loss(net, dc),
        input_power=_input_power(net, dc), placed_fd_count=plan.fd_count,
        ud_count=plan.ud_count,
        flags=_flags(sc, n_fd, power, perf),
    )
    log.info("%s/%s: %d unknowns, drop %.4g V", sc.app.name, kind.value,
             dc.solve_stats["unknowns"], report.total_drop)
    return ScenarioRun(sc, plan, net, dc, tr, report, balance)


def run_many(scenarios: list[Scenario], jobs: int = 1) -> list[ScenarioRun]:
    """Run scenarios, optionally in parallel; results keep the input order."""
    if jobs <= 1:
        return [run_scenario(sc) for sc in scenarios]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_scenario, scenarios))


def matrix_scenarios(apps=BUILTIN_APPS, kinds=tuple(TopologyKind), **kw) -> list[Scenario]:
    return [Scenario.builtin(a, k, **kw) for a in apps for k in kinds]


def compare(runs: list[ScenarioRun], weights=None) -> dict[str, list[metrics.FomReport]]:
    """Per-application ranking of PT-normalized reports, best first."""
    by_app: dict[str, list[metrics.FomReport]] = {}
    for r in runs:
        by_app.setdefault(r.report.app, []).append(r.report)
    return {app: metrics.rank_topologies(metrics.normalize_to_pt(reps), weights)
            for app, reps in by_app.items()}

"""Command line entry point.

    siif-pdn run --app loihi --topology pt --out report.json
    siif-pdn compare --matrix --out results/

Scenario configs are JSON; command line flags override file values.
Exit codes: 0 success, 1 solver/model error, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__, metrics
from .errors import ConfigError, PdnError, ValidationError
from .floorplan import TopologyConfig
from .netlist import DEFAULT_GRID_GRANULARITY, export_interchange
from .parasitics import ExtractionParams
from .platform import (BUILTIN_APPS, ApplicationSpec, DieletSpec, MaterialProperties,
                       PlatformFeatures, TopologyKind, builtin_application, validate,
                       validate_application, validate_materials)
from .scenario import Scenario, ScenarioRun, compare, run_many, run_scenario

log = logging.getLogger("siif_pdn")

EXIT_OK, EXIT_MODEL, EXIT_CONFIG = 0, 1, 2

_TOP_KEYS = {"app", "topology", "platform", "materials", "extraction", "density_point",
             "step_fraction", "solver", "outputs", "weights", "scenarios", "transient"}
_SOLVER_KEYS = {"dt", "horizon", "grid_granularity"}
_OUTPUT_KEYS = {"report", "netlist", "waveforms", "waveform_probes"}

CSV_COLUMNS = (
    "app", "topology", "rank", "score", "fd_count", "placed_fd_count", "ud_count",
    "delivered_power_w", "computing_performance_pflops", "dc_drop_worst_v",
    "inductive_droop_worst_v", "total_drop_v", "resistive_loss_w", "inductive_loss_w",
    "conversion_loss_w", "total_loss_w", "norm_drop", "norm_loss", "norm_performance", "flags",
)


# ------------------------------------------------------------------ config parsing


@dataclass
class ScenarioConfig:
    """A parsed config: the scenario plus where to write its outputs."""

    scenario: Scenario
    report: str | None = None
    netlist: str | None = None
    waveforms: str | None = None
    waveform_probes: str = "worst"
    weights: dict[str, float] | None = None
    raw: dict = field(default_factory=dict)


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")


def _override(cls, base, section: str, data: dict):
    if not data:
        return base
    _check_keys(section, data, {f.name for f in fields(cls)})
    try:
        return replace(base, **data)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def parse_app(value) -> ApplicationSpec:
    """A builtin name, or an object with optional ``base`` plus field overrides."""
    if isinstance(value, str):
        return builtin_application(value)
    _check_keys("app", value, {"base", "name", "dielet", "input_voltage_v", "intermediate_voltage_v"})
    dielet_data = dict(value.get("dielet") or {})
    if "base" in value:
        app = builtin_application(value["base"])
        dielet = _override(DieletSpec, app.dielet, "app.dielet", dielet_data)
    else:
        need = {f.name for f in fields(DieletSpec) if f.name not in ("name", "comm_power_adder_w")}
        missing = sorted(need - set(dielet_data))
        if missing:
            raise ConfigError(f"app.dielet: missing {', '.join(missing)}")
        dielet_data.setdefault("name", value.get("name", "CUSTOM"))
        _check_keys("app.dielet", dielet_data, {f.name for f in fields(DieletSpec)})
        dielet = DieletSpec(**dielet_data)
        app = ApplicationSpec(name=str(value.get("name", dielet.name)).upper(), dielet=dielet)
    app = replace(app, dielet=dielet, name=str(value.get("name", app.name)).upper(),
                  **{k: value[k] for k in ("input_voltage_v", "intermediate_voltage_v") if k in value})
    return validate_application(app)


def parse_topology(value) -> TopologyConfig:
    if isinstance(value, str):
        return TopologyConfig.default(value)
    _check_keys("topology", value, {f.name for f in fields(TopologyConfig)})
    if "kind" not in value:
        raise ConfigError("topology: missing kind")
    overrides = {k: v for k, v in value.items() if k != "kind"}
    return TopologyConfig.default(value["kind"], **overrides)


def parse_config(data: dict) -> ScenarioConfig:
    """Turn one config object into a validated :class:`ScenarioConfig`."""
    _check_keys("config", data, _TOP_KEYS)
    if "app" not in data or "topology" not in data:
        raise ConfigError("config needs both app and topology")
    app = parse_app(data["app"])
    topo = parse_topology(data["topology"])
    feats = validate(_override(PlatformFeatures, PlatformFeatures(), "platform", data.get("platform")))
    mats = validate_materials(_override(MaterialProperties, MaterialProperties(), "materials",
                                        data.get("materials")))
    ext_data = dict(data.get("extraction") or {})
    _check_keys("extraction", ext_data, {f.name for f in fields(ExtractionParams)} - {"features", "materials"})
    extraction = ExtractionParams(features=feats, materials=mats, **ext_data)
    solver = data.get("solver") or {}
    _check_keys("solver", solver, _SOLVER_KEYS)
    outputs = data.get("outputs") or {}
    _check_keys("outputs", outputs, _OUTPUT_KEYS)
    density = data.get("density_point", 0.5)
    if not isinstance(density, (int, float)) or not 0 <= density <= 1:
        raise ValidationError([("density_point", f"must lie in [0, 1], got {density!r}")])
    step = data.get("step_fraction", 0.8)
    if not isinstance(step, (int, float)) or not 0 <= step <= 1:
        raise ValidationError([("step_fraction", f"must lie in [0, 1], got {step!r}")])
    gran = solver.get("grid_granularity", DEFAULT_GRID_GRANULARITY)
    if not isinstance(gran, int) or gran < 1:
        raise ValidationError([("solver.grid_granularity", f"must be an integer >= 1, got {gran!r}")])
    for key in ("dt", "horizon"):
        v = solver.get(key)
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise ValidationError([(f"solver.{key}", f"must be > 0, got {v!r}")])
    probes = outputs.get("waveform_probes", "worst")
    if probes not in ("worst", "all"):
        raise ValidationError([("outputs.waveform_probes", "must be 'worst' or 'all'")])
    weights = data.get("weights")
    if weights is not None:
        _check_keys("weights", weights, set(metrics.DEFAULT_WEIGHTS))
    sc = Scenario(app=app, topology=topo, extraction=extraction, density_point=float(density),
                  grid_granularity=gran, step_fraction=float(step), dt=solver.get("dt"),
                  horizon=solver.get("horizon"), transient=bool(data.get("transient", True)))
    return ScenarioConfig(sc, outputs.get("report"), outputs.get("netlist"), outputs.get("waveforms"),
                          probes, weights, data)


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


# ------------------------------------------------------------------------- output


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_writable(path: str | None, is_dir: bool = False) -> None:
    if path is None:
        return
    target = Path(path) if is_dir else Path(path).parent
    target = target if str(target) else Path(".")
    if is_dir and not target.exists():
        if not target.parent.exists() and str(target.parent):
            raise ConfigError(f"output directory {target.parent} does not exist")
        return
    if not target.is_dir() or not os.access(target, os.W_OK):
        raise ConfigError(f"output location {target} is not a writable directory")


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


# Carried in every report so downstream readers see which numbers are modelled.
MODEL_NOTES = (
    "element values (grid, TWV, pillar, pin, BGA, plane, decap) are first-principles "
    "reconstructions, not extracted from a reference layout",
    "inductive_droop_worst is the largest dip below the post-step DC level at a dielet node",
    "inductive_loss is the I^2R energy of the resistor-current deviation from the "
    "quasi-static DC solution over one load step, times the converter switching frequency",
    "resistive_loss is the DC I^2R loss at full load; conversion_loss is P_out (1/eff - 1) "
    "summed over converters",
)


def _header(command: str, config: dict) -> dict:
    return {"tool": "siif-pdn", "version": __version__, "command": command, "config": config,
            "model_notes": list(MODEL_NOTES)}


def report_document(run: ScenarioRun, config: dict) -> dict:
    rep = run.report
    return {
        "meta": _header("run", config),
        "report": rep.to_dict(),
        "solve": {
            "unknowns": run.dc.solve_stats["unknowns"],
            "source_power_w": run.balance["source_power"],
            "fd_load_power_w": run.balance["fd_load_power"],
            "settle_time_s": run.transient.settle_time if run.transient else None,
            "transient_steps": run.transient.steps if run.transient else 0,
        },
    }


def waveform_csv(run: ScenarioRun, probes: str = "worst") -> str:
    tr = run.transient
    if tr is None:
        raise ConfigError("waveforms requested but transient analysis is disabled")
    if probes == "all":
        cols = list(range(len(tr.probes)))
    else:
        drops = run.scenario.app.dielet.supply_voltage_v - tr.v_dc_post
        cols = sorted({int(drops.argmax()), int(tr.undershoot.argmax())})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "node_label", "voltage_v"])
    labels = [run.netlist.nodes[n].label for n in tr.probes]
    for c in cols:
        for t, v in zip(tr.time_axis, tr.waveforms[:, c]):
            w.writerow([repr(float(t)), labels[c], repr(float(v))])
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def comparison_rows(runs: list[ScenarioRun], weights=None) -> list[dict]:
    """One row per scenario, in scenario order, with per-app rank and score."""
    ranked = compare(runs, weights)
    by_key = {}
    w = weights or metrics.DEFAULT_WEIGHTS
    for app, reps in ranked.items():
        for i, r in enumerate(reps, start=1):
            by_key[(app, r.topology)] = (i, r)
    rows = []
    for run in runs:
        rank, r = by_key[(run.report.app, run.report.topology)]
        n = r.normalized
        rows.append({
            "app": r.app, "topology": r.topology.value, "rank": rank,
            "score": metrics.score(r, w), "fd_count": r.fd_count,
            "placed_fd_count": r.placed_fd_count, "ud_count": r.ud_count,
            "delivered_power_w": r.delivered_power,
            "computing_performance_pflops": r.computing_performance,
            "dc_drop_worst_v": r.dc_drop_worst, "inductive_droop_worst_v": r.inductive_droop_worst,
            "total_drop_v": r.total_drop, "resistive_loss_w": r.resistive_loss,
            "inductive_loss_w": r.inductive_loss, "conversion_loss_w": r.conversion_loss,
            "total_loss_w": r.total_loss, "norm_drop": n["drop"], "norm_loss": n["loss"],
            "norm_performance": n["performance"], "flags": "; ".join(r.flags),
        })
    return rows


def comparison_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (_num(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------- commands


def _merge_flags(data: dict, args) -> dict:
    data = json.loads(json.dumps(data))  # deep copy
    if args.app is not None:
        data["app"] = args.app
    if args.topology is not None:
        topo = data.get("topology")
        if isinstance(topo, dict):
            topo = dict(topo, kind=args.topology)
        else:
            topo = args.topology
        data["topology"] = topo
    if args.grid_granularity is not None:
        data.setdefault("solver", {})["grid_granularity"] = args.grid_granularity
    outputs = data.setdefault("outputs", {})
    for flag, key in (("out", "report"), ("export_netlist", "netlist"), ("waveforms", "waveforms")):
        if getattr(args, flag, None) is not None:
            outputs[key] = getattr(args, flag)
    if not outputs:
        del data["outputs"]
    return data


def cmd_run(args) -> int:
    data = _merge_flags(load_config_file(args.config), args)
    data.pop("scenarios", None)
    cfg = parse_config(data)
    for path in (cfg.report, cfg.netlist, cfg.waveforms):
        _check_writable(path)
    if cfg.waveforms and not cfg.scenario.transient:
        raise ConfigError("waveforms requested but transient analysis is disabled")
    run = run_scenario(cfg.scenario)
    doc = _json(report_document(run, data))
    outputs = []
    if cfg.netlist:
        outputs.append((cfg.netlist, export_interchange(run.netlist)))
    if cfg.waveforms:
        outputs.append((cfg.waveforms, waveform_csv(run, cfg.waveform_probes)))
    if cfg.report:
        outputs.append((cfg.report, doc))
    for path, text in outputs:
        atomic_write(path, text)
    if not cfg.report:
        sys.stdout.write(doc)
    for flag in run.report.flags:
        log.warning("%s/%s: %s", run.report.app, run.report.topology.value, flag)
    return EXIT_OK


def _compare_configs(data: dict, args) -> list[dict]:
    base = {k: v for k, v in data.items() if k not in ("scenarios", "outputs", "weights")}
    if args.matrix:
        apps = [args.app] if args.app else list(BUILTIN_APPS)
        kinds = [args.topology] if args.topology else [k.value for k in TopologyKind]
        return [dict(base, app=a, topology=k) for a in apps for k in kinds]
    if "scenarios" in data:
        if not isinstance(data["scenarios"], list) or not data["scenarios"]:
            raise ConfigError("scenarios must be a non-empty list")
        out = []
        for i, entry in enumerate(data["scenarios"]):
            if not isinstance(entry, dict):
                raise ConfigError(f"scenarios[{i}] must be an object")
            out.append(dict(base, **entry))
        return out
    app = args.app or base.get("app")
    if app is None:
        raise ConfigError("compare needs --matrix, a scenarios list or an app")
    return [dict(base, app=app, topology=k.value) for k in TopologyKind]


def cmd_compare(args) -> int:
    data = load_config_file(args.config)
    if args.grid_granularity is not None:
        data.setdefault("solver", {})["grid_granularity"] = args.grid_granularity
    weights = data.get("weights")
    if weights is not None:
        _check_keys("weights", weights, set(metrics.DEFAULT_WEIGHTS))
    entries = _compare_configs(data, args)
    cfgs = [parse_config(e) for e in entries]
    keys = [(c.scenario.app.name, c.scenario.topology.kind) for c in cfgs]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate (app, topology) scenarios in compare set")
    counts: dict[str, int] = {}
    for app, _ in keys:
        counts[app] = counts.get(app, 0) + 1
    if any(n < 2 for n in counts.values()):
        raise ConfigError("compare needs at least two scenarios per application")
    if any(TopologyKind.PT not in {k for a, k in keys if a == app} for app in counts):
        raise ConfigError("compare needs a PT scenario for every application")
    out = Path(args.out) if args.out else None
    _check_writable(args.out, is_dir=True)
    _check_writable(args.export_netlist, is_dir=True)

    runs = run_many([c.scenario for c in cfgs], jobs=args.jobs)
    rows = comparison_rows(runs, weights)
    summary = {
        "meta": _header("compare", {"scenarios": entries, "weights": weights}),
        "rows": rows,
        "ranking": {app: [r.topology.value for r in reps]
                    for app, reps in compare(runs, weights).items()},
    }
    if args.export_netlist:
        Path(args.export_netlist).mkdir(exist_ok=True)
        for run in runs:
            name = f"{run.report.app.lower()}_{run.report.topology.value.lower()}.cir"
            atomic_write(Path(args.export_netlist) / name, export_interchange(run.netlist))
    if out is None:
        sys.stdout.write(comparison_csv(rows))
    else:
        out.mkdir(exist_ok=True)
        (out / "reports").mkdir(exist_ok=True)
        for run, entry in zip(runs, entries):
            name = f"{run.report.app.lower()}_{run.report.topology.value.lower()}.json"
            atomic_write(out / "reports" / name, _json(report_document(run, entry)))
        atomic_write(out / "comparison.csv", comparison_csv(rows))
        atomic_write(out / "comparison.json", _json(summary))
    for run in runs:
        for flag in run.report.flags:
            log.warning("%s/%s: %s", run.report.app, run.report.topology.value, flag)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="siif-pdn", description="Si-IF wafer-scale power delivery simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON scenario config")
        sp.add_argument("--app", help=f"builtin application ({', '.join(a.lower() for a in BUILTIN_APPS)})")
        sp.add_argument("--topology", help="pt, bt1, bt2_8, bt2_24 or bt3")
        sp.add_argument("--grid-granularity", type=int, help="sectors of the lumped grid")
        sp.add_argument("--export-netlist", help="interchange netlist path (directory for compare)")

    run = sub.add_parser("run", help="solve one scenario and write its FOM report")
    common(run)
    run.add_argument("--out", help="report JSON path (stdout if omitted)")
    run.add_argument("--waveforms", help="waveform CSV path")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="normalized comparison and ranking")
    common(cmp_)
    cmp_.add_argument("--matrix", action="store_true", help="all builtin apps x all topologies")
    cmp_.add_argument("--out", help="output directory (CSV to stdout if omitted)")
    cmp_.add_argument("--jobs", type=int, default=1, help="scenarios solved concurrently")
    cmp_.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ValidationError as exc:
        for name, msg in exc.errors:
            print(f"error: config: {name}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PdnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Figures of merit, PT normalization and topology ranking."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import PdnError
from .platform import TopologyKind

DEFAULT_WEIGHTS = {"drop": 0.4, "loss": 0.4, "performance": 0.2}

# Published per-scenario values: (FD count, delivered power W, PFLOPS).
PUBLISHED_TABLE: dict[tuple[str, TopologyKind], tuple[int, float, float]] = {
    ("LOIHI", TopologyKind.PT): (825, 70.1, 1.04),
    ("LOIHI", TopologyKind.BT1): (1178, 100.1, 1.48),
    ("LOIHI", TopologyKind.BT2_8): (1047, 89.0, 1.32),
    ("LOIHI", TopologyKind.BT2_24): (1131, 96.1, 1.43),
    ("LOIHI", TopologyKind.BT3): (1178, 100.1, 1.48),
    ("EPYC", TopologyKind.PT): (582, 14_550.0, 0.73),
    ("EPYC", TopologyKind.BT1): (831, 20_775.0, 1.05),
    ("EPYC", TopologyKind.BT2_8): (739, 18_475.0, 0.93),
    ("EPYC", TopologyKind.BT2_24): (798, 19_950.0, 1.01),
    ("EPYC", TopologyKind.BT3): (831, 20_775.0, 1.05),
    ("TPU", TopologyKind.PT): (603, 24_120.0, 3.62),
    ("TPU", TopologyKind.BT1): (862, 34_480.0, 5.17),
    ("TPU", TopologyKind.BT2_8): (766, 30_460.0, 4.6),
    ("TPU", TopologyKind.BT2_24): (828, 33_120.0, 4.97),
    ("TPU", TopologyKind.BT3): (862, 34_480.0, 5.17),
}
PERFORMANCE_TOLERANCE = 0.01  # PFLOPS


@dataclass
class FomReport:
    topology: TopologyKind
    app: str
    fd_count: int
    delivered_power: float
    computing_performance: float
    dc_drop_worst: float
    inductive_droop_worst: float
    resistive_loss: float
    inductive_loss: float
    conversion_loss: float = 0.0
    input_power: float = 0.0
    placed_fd_count: int = 0
    ud_count: int = 0
    normalized: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    @property
    def total_drop(self) -> float:
        return self.dc_drop_worst + self.inductive_droop_worst

    @property
    def total_loss(self) -> float:
        return self.resistive_loss + self.inductive_loss + self.conversion_loss

    def to_dict(self) -> dict:
        data = asdict(self)
        data["topology"] = self.topology.value
        data["total_drop"] = self.total_drop
        data["total_loss"] = self.total_loss
        return data


def delivered_power(fd_count: int, tdp: float) -> float:
    if fd_count < 0 or tdp < 0:
        raise ValueError("fd_count and tdp must be non-negative")
    return fd_count * tdp


def computing_performance(fd_count: int, throughput_tflops: float) -> float:
    """Aggregate PFLOPS for ``fd_count`` dielets of the given TFLOPS each."""
    if fd_count < 0 or throughput_tflops < 0:
        raise ValueError("fd_count and throughput must be non-negative")
    return fd_count * throughput_tflops / 1000.0


def published_flags(app: str, kind: TopologyKind, fd_count: int, power: float,
                    performance: float, tdp: float) -> list[str]:
    ref = PUBLISHED_TABLE.get((app, kind))
    if ref is None:
        return []
    flags = []
    if fd_count != ref[0]:
        flags.append(f"fd_count {fd_count} differs from published {ref[0]}")
    if abs(power - ref[1]) > tdp * (1 + 1e-9):
        flags.append(f"delivered_power {power:.6g} W differs from published {ref[1]:.6g} W "
                     f"by more than one dielet TDP")
    if abs(performance - ref[2]) > PERFORMANCE_TOLERANCE:
        flags.append(f"computing_performance {performance:.4g} PFLOPS differs from published "
                     f"{ref[2]:.4g} PFLOPS (fd_count x dielet throughput)")
    return flags


def normalize_to_pt(reports: list[FomReport]) -> list[FomReport]:
    """Divide drop, loss and performance by the PT report of the same app.

    Returns new reports; the inputs are left untouched.
    """
    baseline = {r.app: r for r in reports if r.topology is TopologyKind.PT}
    out = []
    for r in reports:
        pt = baseline.get(r.app)
        if pt is None:
            raise PdnError(f"no PT baseline for application {r.app}")
        norm = {
            "drop": _ratio(r.total_drop, pt.total_drop),
            "loss": _ratio(r.total_loss, pt.total_loss),
            "performance": _ratio(r.computing_performance, pt.computing_performance),
        }
        out.append(replace(r, normalized=norm, flags=list(r.flags)))
    return out


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return float(a / b)


def score(report: FomReport, weights: dict[str, float] = DEFAULT_WEIGHTS) -> float:
    """Weighted PT-normalized score; lower is better."""
    total = sum(weights.values())
    if not total > 0 or min(weights.values()) < 0:
        raise ValueError("weights must be non-negative with a positive sum")
    n = report.normalized
    if not n:
        raise PdnError("report has not been normalized")
    perf = n["performance"]
    inv_perf = math.inf if perf == 0 else 1.0 / perf
    return float(weights.get("drop", 0.0) * n["drop"] + weights.get("loss", 0.0) * n["loss"]
                 + weights.get("performance", 0.0) * inv_perf) / total


def rank_topologies(reports: list[FomReport],
                    weights: dict[str, float] | None = None) -> list[FomReport]:
    """Order reports of one application best-first; ties fall back to topology order."""
    weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
    if len(reports) < 2:
        raise PdnError("ranking needs at least two reports")
    if len({r.app for r in reports}) != 1:
        raise PdnError("ranking mixes applications")
    if any(not r.normalized for r in reports):
        reports = normalize_to_pt(reports)
    # Rounding keeps weight rescaling from reordering near-equal scores.
    scored = [(round(score(r, weights), 12), r.topology.order, r) for r in reports]
    scored.sort(key=lambda e: (e[0], e[1]))
    return [r for _, _, r in scored]


def fd_drops(supply_voltage: float, fd_voltages: np.ndarray) -> np.ndarray:
    return supply_voltage - np.asarray(fd_voltages)

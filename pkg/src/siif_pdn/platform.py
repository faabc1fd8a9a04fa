"""Si-IF platform catalog: feature dimensions, materials, decap stages and applications.

All catalog objects are frozen dataclasses; overrides go through
:func:`dataclasses.replace` followed by the matching ``validate_*`` call.
Lengths carry their unit in the field name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

from .errors import CatalogError, ValidationError


class TopologyKind(str, Enum):
    """Power delivery topologies, in tie-break order."""

    PT = "PT"
    BT1 = "BT1"
    BT2_8 = "BT2_8"
    BT2_24 = "BT2_24"
    BT3 = "BT3"

    @classmethod
    def parse(cls, value: str | TopologyKind) -> TopologyKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise CatalogError(f"unknown topology {value!r}; expected one of "
                               f"{', '.join(k.value for k in cls)}") from None

    @property
    def is_tiled(self) -> bool:
        return self in (TopologyKind.BT2_8, TopologyKind.BT2_24)

    @property
    def order(self) -> int:
        return list(TopologyKind).index(self)


@dataclass(frozen=True)
class PlatformFeatures:
    wafer_diameter_mm: float = 300.0
    wafer_thickness_mm: float = 0.5
    wafer_area_mm2: float = 70_685.0
    inter_dielet_pitch_um: float = 100.0
    pillar_diameter_um: float = 5.0
    pillar_height_um: float = 5.0
    pillar_pitch_um: float = 10.0
    pin_diameter_mm: float = 1.5
    pin_height_mm: float = 20.0
    pin_pitch_mm: float = 3.0
    twv_diameter_um: float = 100.0
    twv_height_um: float = 500.0
    twv_pitch_um: float = 200.0
    interconnect_width_um: float = 2.0
    interconnect_thickness_um: float = 2.0
    interconnect_pitch_um: float = 4.0
    interconnect_layers: int = 4
    pad_area_um2: float = 20.0
    bga_diameter_um: float = 300.0
    bga_height_um: float = 200.0

    @property
    def wafer_radius_mm(self) -> float:
        return self.wafer_diameter_mm / 2.0


@dataclass(frozen=True)
class MaterialProperties:
    cu_resistivity: float = 1.68e-8  # ohm*m, room temperature
    vacuum_permeability: float = 4e-7 * math.pi


MU0 = 4e-7 * math.pi

# Dielet area bounds for the Si-IF, mm^2.
MIN_DIELET_AREA = 1.0
MAX_DIELET_AREA = 100.0


def validate(features: PlatformFeatures) -> PlatformFeatures:
    """Check every platform invariant and raise one error listing all violations."""
    errors: list[tuple[str, str]] = []
    for f in fields(features):
        value = getattr(features, f.name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            errors.append((f.name, f"must be numeric, got {value!r}"))
        elif not value > 0:
            errors.append((f.name, f"must be > 0, got {value}"))
    # Cross-field checks only run when their inputs passed the basic check.
    bad = {name for name, _ in errors}
    layers = features.interconnect_layers
    if "interconnect_layers" not in bad and (not 2 <= layers <= 4 or int(layers) != layers):
        errors.append(("interconnect_layers", f"must be an integer in [2, 4], got {layers}"))
    if not bad & {"wafer_diameter_mm", "wafer_area_mm2"}:
        disc = math.pi * features.wafer_radius_mm ** 2
        if abs(features.wafer_area_mm2 - disc) > 1e-3 * disc:
            errors.append(("wafer_area_mm2",
                           f"{features.wafer_area_mm2} inconsistent with diameter "
                           f"{features.wafer_diameter_mm} mm (pi*r^2 = {disc:.1f})"))
    if not bad & {"twv_height_um", "wafer_thickness_mm"} and \
            features.twv_height_um > features.wafer_thickness_mm * 1000.0:
        errors.append(("twv_height_um",
                       f"{features.twv_height_um} um exceeds wafer thickness "
                       f"{features.wafer_thickness_mm * 1000.0} um"))
    if not bad & {"interconnect_width_um", "interconnect_pitch_um"} and \
            features.interconnect_width_um > features.interconnect_pitch_um:
        errors.append(("interconnect_width_um", "wider than interconnect pitch"))
    if errors:
        raise ValidationError(errors)
    return features


def validate_materials(materials: MaterialProperties) -> MaterialProperties:
    if not materials.cu_resistivity > 0:
        raise ValidationError([("cu_resistivity", f"must be > 0, got {materials.cu_resistivity}")])
    return materials


# --------------------------------------------------------------------------- decaps


class DecapLocation(str, Enum):
    PCB = "PCB"
    WAFER_BACKSIDE = "WAFER_BACKSIDE"
    WAFER_TOPSIDE = "WAFER_TOPSIDE"
    UD_INTERNAL = "UD_INTERNAL"
    FD_INTERNAL = "FD_INTERNAL"


class DecapKind(str, Enum):
    ELECTROLYTIC = "ELECTROLYTIC"
    CERAMIC = "CERAMIC"
    DTCAP = "DTCAP"
    CMOS = "CMOS"


@dataclass(frozen=True)
class DecapStage:
    """One row of the decap hierarchy.

    Exactly one of ``esr_range_mohm`` and ``rc_range_ns`` is set. An ESL range
    of ``(0, 0)`` stands for a negligible series inductance.
    """

    location: DecapLocation
    kind: DecapKind
    density_range_nf_mm2: tuple[float, float]
    esl_range_nh: tuple[float, float]
    esr_range_mohm: tuple[float, float] | None = None
    rc_range_ns: tuple[float, float] | None = None

    def __post_init__(self):
        ranges = [("density_range_nf_mm2", self.density_range_nf_mm2),
                  ("esl_range_nh", self.esl_range_nh)]
        if (self.esr_range_mohm is None) == (self.rc_range_ns is None):
            raise ValidationError([("esr_range_mohm", "exactly one of ESR range or RC bound is required")])
        if self.esr_range_mohm is not None:
            ranges.append(("esr_range_mohm", self.esr_range_mohm))
        if self.rc_range_ns is not None:
            ranges.append(("rc_range_ns", self.rc_range_ns))
        errors = [(name, f"invalid range {lo}..{hi}") for name, (lo, hi) in ranges
                  if lo < 0 or hi < lo]
        if errors:
            raise ValidationError(errors)


DECAP_CATALOG: dict[DecapLocation, DecapStage] = {
    DecapLocation.PCB: DecapStage(
        DecapLocation.PCB, DecapKind.ELECTROLYTIC, (2_600.0, 4_800.0), (3_000.0, 6_000.0),
        esr_range_mohm=(10.0, 20.0)),
    DecapLocation.WAFER_BACKSIDE: DecapStage(
        DecapLocation.WAFER_BACKSIDE, DecapKind.CERAMIC, (8_800.0, 40_000.0), (300.0, 400.0),
        esr_range_mohm=(10.0, 20.0)),
    DecapLocation.WAFER_TOPSIDE: DecapStage(
        DecapLocation.WAFER_TOPSIDE, DecapKind.DTCAP, (300.0, 1_500.0), (0.0, 0.0),
        rc_range_ns=(2.0, 20.0)),
    DecapLocation.UD_INTERNAL: DecapStage(
        DecapLocation.UD_INTERNAL, DecapKind.CMOS, (1.0, 3.0), (0.0, 0.0),
        rc_range_ns=(0.0, 250.0)),
    DecapLocation.FD_INTERNAL: DecapStage(
        DecapLocation.FD_INTERNAL, DecapKind.CMOS, (1.0, 3.0), (0.0, 0.0),
        rc_range_ns=(0.0, 250.0)),
}

_STAGES_BY_TOPOLOGY = {
    TopologyKind.PT: (DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL, DecapLocation.FD_INTERNAL),
    TopologyKind.BT1: (DecapLocation.PCB, DecapLocation.WAFER_BACKSIDE, DecapLocation.WAFER_TOPSIDE),
    TopologyKind.BT3: (DecapLocation.PCB, DecapLocation.WAFER_BACKSIDE, DecapLocation.WAFER_TOPSIDE),
    TopologyKind.BT2_8: (DecapLocation.PCB, DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL),
    TopologyKind.BT2_24: (DecapLocation.PCB, DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL),
}


def decap_stages_for(topology: TopologyKind | str) -> list[DecapStage]:
    """The three-stage decap hierarchy used by ``topology``, outermost stage first."""
    kind = TopologyKind.parse(topology)
    return [DECAP_CATALOG[loc] for loc in _STAGES_BY_TOPOLOGY[kind]]


# --------------------------------------------------------------------- applications


@dataclass(frozen=True)
class DieletSpec:
    name: str
    area_mm2: float
    tdp_w: float
    supply_voltage_v: float
    current_a: float
    frequency_ghz: float
    throughput_tflops: float
    comm_power_adder_w: float = 0.0

    @property
    def effective_tdp_w(self) -> float:
        """TDP including the short-range communication budget."""
        return self.tdp_w + self.comm_power_adder_w

    @property
    def load_current_a(self) -> float:
        return self.effective_tdp_w / self.supply_voltage_v

    @property
    def side_mm(self) -> float:
        return math.sqrt(self.area_mm2)


@dataclass(frozen=True)
class ApplicationSpec:
    name: str
    dielet: DieletSpec
    input_voltage_v: float = 48.0
    intermediate_voltage_v: float = 12.0


def validate_dielet(d: DieletSpec) -> DieletSpec:
    errors: list[tuple[str, str]] = []
    for name in ("area_mm2", "tdp_w", "supply_voltage_v", "current_a",
                 "frequency_ghz", "throughput_tflops"):
        value = getattr(d, name)
        if not isinstance(value, (int, float)) or not value > 0:
            errors.append((name, f"must be > 0, got {value!r}"))
    if not d.comm_power_adder_w >= 0:
        errors.append(("comm_power_adder_w", f"must be >= 0, got {d.comm_power_adder_w}"))
    if errors:
        raise ValidationError(errors)
    ratio = d.tdp_w / (d.supply_voltage_v * d.current_a)
    if not 0.9 <= ratio <= 1.1:
        errors.append(("tdp_w", f"tdp/(V*I) = {ratio:.3f} outside [0.9, 1.1]"))
    if not MIN_DIELET_AREA <= d.area_mm2 <= MAX_DIELET_AREA:
        errors.append(("area_mm2", f"{d.area_mm2} outside the {MIN_DIELET_AREA:g}-"
                                   f"{MAX_DIELET_AREA:g} mm^2 dielet range"))
    if errors:
        raise ValidationError(errors)
    return d


def validate_application(app: ApplicationSpec) -> ApplicationSpec:
    validate_dielet(app.dielet)
    errors = []
    if not app.input_voltage_v > app.dielet.supply_voltage_v:
        errors.append(("input_voltage_v", "must exceed the dielet supply voltage"))
    if not app.dielet.supply_voltage_v < app.intermediate_voltage_v < app.input_voltage_v:
        errors.append(("intermediate_voltage_v", "must lie between supply and input voltage"))
    if errors:
        raise ValidationError(errors)
    return app


_BUILTIN = {
    "LOIHI": DieletSpec("LOIHI", area_mm2=60.0, tdp_w=0.085, supply_voltage_v=1.0,
                        current_a=0.085, frequency_ghz=0.032, throughput_tflops=1.26),
    "EPYC": DieletSpec("EPYC", area_mm2=85.0, tdp_w=25.0, supply_voltage_v=1.0,
                       current_a=25.0, frequency_ghz=3.0, throughput_tflops=0.61),
    "TPU": DieletSpec("TPU", area_mm2=82.0, tdp_w=40.0, supply_voltage_v=1.8,
                      current_a=22.22, frequency_ghz=0.7, throughput_tflops=6.0),
}

BUILTIN_APPS = tuple(_BUILTIN)


def builtin_application(name: str) -> ApplicationSpec:
    """Si-IF dielet column of the application table for LOIHI, EPYC or TPU."""
    key = str(name).strip().upper()
    if key not in _BUILTIN:
        raise CatalogError(f"unknown application {name!r}; expected one of {', '.join(_BUILTIN)}")
    return ApplicationSpec(name=key, dielet=_BUILTIN[key])

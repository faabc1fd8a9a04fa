"""Lumped R/L/C extraction for Si-IF power delivery structures.

The element formulas are reconstructions from first principles (DC
resistance, partial self-inductance of a bar, loop inductance of a via in a
return array); no extracted field solutions are used. Inputs are SI units
unless the argument name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .platform import (MU0, DecapStage, MaterialProperties, PlatformFeatures)

UM = 1e-6
MM = 1e-3

BACKSIDE_PLANE_THICKNESS = 35e-6  # m, 1 oz Cu
PLANE_SPREADING_SQUARES = 0.5
PILLAR_POWER_SHARE = 0.25
DEFAULT_TWV_PER_DIELET = 16
DEFAULT_BGA_PER_TILE = 4
DEFAULT_BGA_PITCH_MM = 0.5


@dataclass(frozen=True)
class Parasitic:
    resistance: float = 0.0
    inductance: float = 0.0
    capacitance: float = 0.0

    def __post_init__(self):
        if min(self.resistance, self.inductance, self.capacitance) < 0:
            raise DomainError(f"negative parasitic {self}")

    def parallel(self, n: int) -> Parasitic:
        """``n`` identical, uncoupled copies in parallel."""
        if n < 1:
            raise DomainError("parallel count must be >= 1")
        return Parasitic(self.resistance / n, self.inductance / n, self.capacitance * n)


def trace_resistance(length: float, width: float, thickness: float, resistivity: float) -> float:
    if length < 0 or not (width > 0 and thickness > 0 and resistivity > 0):
        raise DomainError("trace dimensions and resistivity must be positive")
    return resistivity * length / (width * thickness)


def cylinder_resistance(diameter: float, height: float, resistivity: float) -> float:
    if not (diameter > 0 and height > 0 and resistivity > 0):
        raise DomainError("cylinder dimensions and resistivity must be positive")
    return resistivity * height / (math.pi * (diameter / 2.0) ** 2)


def trace_inductance(length: float, width: float, thickness: float) -> float:
    """Partial self-inductance of a rectangular bar (valid for length >= width + thickness)."""
    if not (length > 0 and width > 0 and thickness > 0):
        raise DomainError("bar dimensions must be positive")
    wt = width + thickness
    if length < wt:
        raise DomainError(f"bar formula invalid for length {length:.3g} < width+thickness {wt:.3g}")
    return MU0 * length / (2 * math.pi) * (math.log(2 * length / wt) + 0.5 + 0.2235 * wt / length)


def via_inductance(diameter: float, height: float, pitch: float) -> float:
    """Loop inductance of one via surrounded by return vias at ``pitch``.

    Used for structures too short for the bar formula (pillars, solder balls).
    """
    if not (diameter > 0 and height > 0 and pitch > diameter / 2):
        raise DomainError("via needs positive height and pitch > radius")
    return MU0 * height / (2 * math.pi) * math.log(pitch / (diameter / 2))


def grid_sheet_resistance(features: PlatformFeatures, resistivity: float = 1.68e-8) -> float:
    """Effective sheet resistance of the topside power mesh, ohm/square.

    Half of the interconnect layers carry power; the other half carry ground.
    """
    w = features.interconnect_width_um * UM
    t = features.interconnect_thickness_um * UM
    p = features.interconnect_pitch_um * UM
    power_layers = features.interconnect_layers / 2
    return (resistivity / t) * (p / w) / power_layers


def mesh_segment(length: float, span: float, features: PlatformFeatures,
                 resistivity: float) -> Parasitic:
    """A rectangular patch of the topside mesh carrying current along ``length``.

    Resistance is sheet resistance times squares. Inductance treats the
    ``span/pitch`` parallel lines of each power layer as uncoupled bars.
    """
    if not (length > 0 and span > 0):
        raise DomainError("mesh patch must have positive length and span")
    r = grid_sheet_resistance(features, resistivity) * length / span
    w = features.interconnect_width_um * UM
    t = features.interconnect_thickness_um * UM
    lines = max(1, int(span / (features.interconnect_pitch_um * UM))) * features.interconnect_layers // 2
    bar_len = max(length, w + t)
    return Parasitic(r, trace_inductance(bar_len, w, t) / lines)


def plane_spreading_resistance(resistivity: float, thickness: float = BACKSIDE_PLANE_THICKNESS,
                               squares: float = PLANE_SPREADING_SQUARES) -> float:
    return resistivity / thickness * squares


def decap_bank(area_mm2: float, stage: DecapStage, density_point: float = 0.5) -> Parasitic:
    """Series C-ESR-ESL bank of ``area_mm2`` built from one hierarchy stage.

    ``density_point`` interpolates every range between its min (0) and max (1).
    Stages specified by an RC bound get ESR = (RC range midpoint) / C.
    """
    if not area_mm2 > 0:
        raise DomainError("decap area must be positive")
    if not 0.0 <= density_point <= 1.0:
        raise DomainError("density_point must lie in [0, 1]")

    def interp(rng):
        lo, hi = rng
        return lo + density_point * (hi - lo)

    c = area_mm2 * interp(stage.density_range_nf_mm2) * 1e-9
    esl = interp(stage.esl_range_nh) * 1e-9
    if stage.esr_range_mohm is not None:
        esr = interp(stage.esr_range_mohm) * 1e-3
    else:
        esr = 0.5 * sum(stage.rc_range_ns) * 1e-9 / c
    return Parasitic(esr, esl, c)


# ----------------------------------------------------------------- vertical stacks


@dataclass(frozen=True)
class ExtractionParams:
    """Geometry plus the structure counts that the geometry alone leaves open.

    ``None`` counts are derived: pillars from the dielet perimeter pad budget,
    pins from a hexagonal array under the wafer.
    """

    features: PlatformFeatures = PlatformFeatures()
    materials: MaterialProperties = MaterialProperties()
    twv_per_dielet: int = DEFAULT_TWV_PER_DIELET
    pillar_pairs_per_dielet: int | None = None
    pins_total: int | None = None
    bga_per_tile: int = DEFAULT_BGA_PER_TILE
    bga_pitch_mm: float = DEFAULT_BGA_PITCH_MM

    def __post_init__(self):
        errors = []
        for name in ("twv_per_dielet", "pillar_pairs_per_dielet", "pins_total", "bga_per_tile"):
            value = getattr(self, name)
            if value is not None and (int(value) != value or value < 1):
                errors.append((name, f"must be an integer >= 1, got {value}"))
        if not self.bga_pitch_mm > 0:
            errors.append(("bga_pitch_mm", "must be > 0"))
        if errors:
            raise ValidationError(errors)

    @property
    def rho(self) -> float:
        return self.materials.cu_resistivity

    def pillars_for(self, dielet_area_mm2: float) -> int:
        if self.pillar_pairs_per_dielet is not None:
            return int(self.pillar_pairs_per_dielet)
        perimeter_um = 4 * math.sqrt(dielet_area_mm2) * 1000.0
        pads = perimeter_um / self.features.pillar_pitch_um
        return max(1, int(math.floor(PILLAR_POWER_SHARE * pads)))

    def pin_count(self) -> int:
        if self.pins_total is not None:
            return int(self.pins_total)
        return hex_points_in_disc(self.features.wafer_radius_mm, self.features.pin_pitch_mm)

    def pillar(self) -> Parasitic:
        f = self.features
        d, h, p = f.pillar_diameter_um * UM, f.pillar_height_um * UM, f.pillar_pitch_um * UM
        return Parasitic(cylinder_resistance(d, h, self.rho), via_inductance(d, h, p))

    def twv(self) -> Parasitic:
        f = self.features
        d, h = f.twv_diameter_um * UM, f.twv_height_um * UM
        return Parasitic(cylinder_resistance(d, h, self.rho), trace_inductance(h, d, d))

    def pin(self) -> Parasitic:
        f = self.features
        d, h = f.pin_diameter_mm * MM, f.pin_height_mm * MM
        return Parasitic(cylinder_resistance(d, h, self.rho), trace_inductance(h, d, d))

    def bga(self) -> Parasitic:
        f = self.features
        d, h = f.bga_diameter_um * UM, f.bga_height_um * UM
        return Parasitic(cylinder_resistance(d, h, self.rho),
                         via_inductance(d, h, self.bga_pitch_mm * MM))

    def plane_spreading(self) -> float:
        return plane_spreading_resistance(self.rho)


def hex_points_in_disc(radius: float, pitch: float) -> int:
    """Count of hexagonal-lattice points (spacing ``pitch``) inside a disc."""
    dy = pitch * math.sqrt(3) / 2
    rows = int(radius / dy) + 1
    total = 0
    for j in range(-rows, rows + 1):
        y = j * dy
        if abs(y) > radius:
            continue
        half = math.sqrt(radius * radius - y * y)
        shift = 0.5 * pitch if j % 2 else 0.0
        i = np.arange(-int(half / pitch) - 2, int(half / pitch) + 3)
        xs = i * pitch + shift
        total += int(np.count_nonzero(np.abs(xs) <= half))
    return total

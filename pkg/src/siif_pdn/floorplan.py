"""Wafer floorplans: usable area, FD/UD tiles and dielet coordinates.

Coordinates are in mm with the wafer center at the origin. Dielets are
squares of equal area laid on a lattice whose cell is the dielet side plus
the inter-dielet pitch.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .errors import DomainError, PlacementError, ValidationError
from .platform import ApplicationSpec, PlatformFeatures, TopologyKind

PT_RING_AREA_FRACTION = 0.30

# Calibrated per-topology efficiencies; see README "Calibration".
DEFAULT_EFFICIENCY = {
    TopologyKind.PT: 0.90,
    TopologyKind.BT1: 0.82,
    TopologyKind.BT2_8: 0.80,
    TopologyKind.BT2_24: 0.80,
    TopologyKind.BT3: 0.90,
}
DEFAULT_INTERMEDIATE_EFFICIENCY = 0.90


@dataclass(frozen=True)
class TopologyConfig:
    """A topology plus its behavioral converter parameters.

    ``converter_efficiency`` is the POL stage; ``intermediate_efficiency`` is
    the 48/12 stage and only matters for BT3.
    """

    kind: TopologyKind
    converter_efficiency: float = 0.90
    converter_output_resistance: float = 1e-3
    converter_switching_frequency: float = 1e6
    intermediate_efficiency: float = DEFAULT_INTERMEDIATE_EFFICIENCY

    def __post_init__(self):
        object.__setattr__(self, "kind", TopologyKind.parse(self.kind))
        errors = []
        for name in ("converter_efficiency", "intermediate_efficiency"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                errors.append((name, f"must be in (0, 1], got {value}"))
        if not self.converter_output_resistance >= 0:
            errors.append(("converter_output_resistance", "must be >= 0"))
        if not self.converter_switching_frequency > 0:
            errors.append(("converter_switching_frequency", "must be > 0"))
        if errors:
            raise ValidationError(errors)

    @classmethod
    def default(cls, kind: TopologyKind | str, **overrides) -> TopologyConfig:
        kind = TopologyKind.parse(kind)
        params = {"converter_efficiency": DEFAULT_EFFICIENCY[kind]}
        params.update(overrides)
        return cls(kind=kind, **params)


@dataclass(frozen=True)
class Tile:
    """An n x n slot pattern; ``ud_slot`` is the (row, col) of the UD or None."""

    size: int
    ud_slot: tuple[int, int] | None = None

    @property
    def fd_capacity(self) -> int:
        return self.size * self.size - (1 if self.ud_slot is not None else 0)


@dataclass(frozen=True)
class PlacedTile:
    pattern: Tile
    center: tuple[float, float]
    ud_position: tuple[float, float] | None
    fd_indices: tuple[int, ...]


@dataclass(frozen=True)
class Floorplan:
    topology: TopologyConfig
    target_fd_count: int
    dielet_side_mm: float
    cell_mm: float
    fd_positions: tuple[tuple[float, float], ...]
    tiles: tuple[PlacedTile, ...]
    fd_tile: tuple[int, ...]
    fd_hops: tuple[int, ...]
    usable_radius_mm: float
    ring_inner_radius_mm: float | None = None

    @property
    def fd_count(self) -> int:
        return len(self.fd_positions)

    @property
    def ud_count(self) -> int:
        return sum(1 for t in self.tiles if t.ud_position is not None)

    @property
    def ud_positions(self) -> list[tuple[float, float]]:
        return [t.ud_position for t in self.tiles if t.ud_position is not None]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["topology"]["kind"] = self.topology.kind.value
        data["fd_count"] = self.fd_count
        data["ud_count"] = self.ud_count
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def usable_fraction(kind: TopologyKind | str) -> float:
    """Fraction of the wafer area available to FDs."""
    kind = TopologyKind.parse(kind)
    if kind is TopologyKind.PT:
        return 1.0 - PT_RING_AREA_FRACTION
    if kind.is_tiled:
        cap = tile_layout(kind).fd_capacity
        return cap / (cap + 1)
    return 1.0


def fd_count(kind: TopologyKind | str, dielet_area: float, wafer_area: float) -> int:
    """Nearest-integer (half-up) count of FDs that fit the usable area."""
    if not dielet_area > 0 or not wafer_area > 0:
        raise DomainError("areas must be positive")
    if dielet_area > wafer_area:
        raise DomainError(f"dielet area {dielet_area} exceeds wafer area {wafer_area}")
    return math.floor(usable_fraction(kind) * wafer_area / dielet_area + 0.5)


def tile_layout(kind: TopologyKind | str) -> Tile:
    kind = TopologyKind.parse(kind)
    if kind is TopologyKind.BT2_8:
        return Tile(3, (1, 1))
    if kind is TopologyKind.BT2_24:
        return Tile(5, (2, 2))
    return Tile(1, None)


def ring_distance(position: tuple[float, float], ring_inner_radius: float) -> float:
    """Radial distance from ``position`` out to the PT converter ring."""
    r = math.hypot(*position)
    if r > ring_inner_radius * (1 + 1e-12):
        raise DomainError(f"position at radius {r:.6g} mm lies outside ring {ring_inner_radius:.6g} mm")
    return max(ring_inner_radius - r, 0.0)


def _inside(x: float, y: float, radius: float) -> bool:
    return x * x + y * y <= radius * radius * (1 + 1e-12)


def _brick_rows(radius: float, cell: float, y_offset: float) -> list[tuple[float, float]]:
    # Each row is centred on the y axis and holds every slot whose centre fits.
    slots = []
    m = int(radius / cell) + 2
    for j in range(-m, m + 1):
        y = (j + y_offset) * cell
        if abs(y) > radius:
            continue
        half = math.sqrt(max(radius * radius - y * y, 0.0))
        n = int(math.floor(2 * half / cell + 1e-9)) + 1
        for i in range(n):
            x = (i - (n - 1) / 2) * cell
            if _inside(x, y, radius):
                slots.append((x, y))
    return slots


def _slot_key(p: tuple[float, float]):
    return (round(p[0] ** 2 + p[1] ** 2, 6), round(p[1], 9), round(p[0], 9))


def _place_untiled(radius: float, cell: float, target: int):
    candidates = [_brick_rows(radius, cell, oy) for oy in (0.0, 0.5)]
    slots = max(candidates, key=len)
    slots.sort(key=_slot_key)
    return slots[:target]


def _tile_row(yc: float, x_offset: float, radius: float, cell: float, tile: Tile):
    n = tile.size
    span = n * cell
    k = int(radius / span) + 2
    placed = []
    for i in range(-k, k + 1):
        xc = (i + x_offset) * span
        inside = []
        for a in range(n):
            for b in range(n):
                x = xc + (b - n // 2) * cell
                y = yc + (a - n // 2) * cell
                if _inside(x, y, radius):
                    inside.append(((a, b), (x, y)))
        if len(inside) < 2:
            continue
        slots = dict(inside)
        ud = tile.ud_slot
        if ud not in slots:
            # Boundary tile: the UD takes the in-disc slot nearest the tile centre.
            ud = min(slots, key=lambda s: ((s[0] - n // 2) ** 2 + (s[1] - n // 2) ** 2, s))
        fds = [(s, p) for s, p in inside if s != ud]
        hops = [max(abs(s[0] - ud[0]), abs(s[1] - ud[1])) for s, _ in fds]
        placed.append(((xc, yc), slots[ud], [p for _, p in fds], hops))
    return placed


def _place_tiled(radius: float, cell: float, tile: Tile):
    span = tile.size * cell
    best = None
    for oy in (0.0, 0.5):
        rows = []
        m = int(radius / span) + 2
        for j in range(-m, m + 1):
            yc = (j + oy) * span
            options = [_tile_row(yc, ox, radius, cell, tile) for ox in (0.0, 0.5)]
            rows.extend(max(options, key=lambda row: sum(len(t[2]) for t in row)))
        count = sum(len(t[2]) for t in rows)
        if best is None or count > best[0]:
            best = (count, rows)
    return best[1]


def place_dielets(features: PlatformFeatures, app: ApplicationSpec,
                  topology: TopologyConfig) -> Floorplan:
    """Deterministic lattice placement of FDs (and UDs for BT2) on the wafer.

    Untiled topologies use centred brick rows and keep the ``fd_count`` slots
    closest to the wafer centre. BT2 packs tile rows; boundary tiles keep
    their in-disc slots with the UD moved to the slot nearest the tile centre.
    """
    kind = topology.kind
    side = app.dielet.side_mm
    cell = side + features.inter_dielet_pitch_um * 1e-3
    wafer_r = features.wafer_radius_mm
    ring_r = None
    if kind is TopologyKind.PT:
        ring_r = math.sqrt(usable_fraction(kind)) * wafer_r
        usable_r = ring_r
    else:
        usable_r = wafer_r
    if side > 2 * usable_r:
        raise PlacementError(f"dielet side {side:.3g} mm does not fit a {usable_r:.3g} mm radius region")
    target = fd_count(kind, app.dielet.area_mm2, features.wafer_area_mm2)

    pattern = tile_layout(kind)
    positions: list[tuple[float, float]] = []
    tiles: list[PlacedTile] = []
    fd_tile: list[int] = []
    fd_hops: list[int] = []
    if kind.is_tiled:
        raw = _place_tiled(usable_r, cell, pattern)
        # Drop FDs furthest from the centre if the lattice overshoots the count.
        all_fds = sorted(((p, ti, h) for ti, t in enumerate(raw) for p, h in zip(t[2], t[3])),
                         key=lambda e: _slot_key(e[0]))[:target]
        keep: dict[int, list] = {}
        for p, ti, h in all_fds:
            keep.setdefault(ti, []).append((p, h))
        for ti, (center, ud_pos, _, _) in enumerate(raw):
            if ti not in keep:
                continue
            members = sorted(keep[ti], key=lambda e: (round(e[0][1], 9), round(e[0][0], 9)))
            idx = []
            for p, h in members:
                idx.append(len(positions))
                positions.append(p)
                fd_tile.append(len(tiles))
                fd_hops.append(h)
            tiles.append(PlacedTile(pattern, center, ud_pos, tuple(idx)))
    else:
        for p in _place_untiled(usable_r, cell, target):
            fd_tile.append(len(tiles))
            fd_hops.append(0)
            tiles.append(PlacedTile(pattern, p, None, (len(positions),)))
            positions.append(p)

    if not positions:
        raise PlacementError("no dielet fits the usable region")
    return Floorplan(topology=topology, target_fd_count=target, dielet_side_mm=side,
                     cell_mm=cell, fd_positions=tuple(positions), tiles=tuple(tiles),
                     fd_tile=tuple(fd_tile), fd_hops=tuple(fd_hops),
                     usable_radius_mm=usable_r, ring_inner_radius_mm=ring_r)

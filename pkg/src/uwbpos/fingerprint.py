"""Zone gridding, reference-point strategies, and distance-database generation.

The offline phase of fingerprint positioning: pick reference points (TDT,
TNT, or CT), fit the measurement model from their averaged measurements, then
predict the measured distance triple for every grid-cell centroid. Those
triples are the training database for the neural-network locator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmptyDatabase, GridMismatch, NonDividingCellSize, OutOfZone
from .geometry import AnchorSet, Point2D, Zone, euclidean_distance
from .ranging import LinearDistortion, fit_anchors, fit_linear_model, fit_residual_rms

STRATEGY_TDT = "TDT"
STRATEGY_TNT = "TNT"
STRATEGY_CT = "CT"

SUBZONE_LEFT = "left"
SUBZONE_RIGHT = "right"

DATABASE_CSV_HEADER = "cell_id,cx_mm,cy_mm,f0_mm,f1_mm,f2_mm"

# CT's four reference points, named by their role in the recipe.
_CT_LOWER_LEFT = Point2D(100.0, 100.0)
_CT_UPPER_LEFT = Point2D(100.0, 1900.0)
_CT_LOWER_RIGHT = Point2D(900.0, 100.0)
_CT_UPPER_RIGHT = Point2D(900.0, 1900.0)
_CT_POINTS = frozenset({_CT_LOWER_LEFT, _CT_UPPER_LEFT, _CT_LOWER_RIGHT, _CT_UPPER_RIGHT})


@dataclass(frozen=True)
class Grid:
    """Uniform square-cell partition of the zone.

    Cells are indexed row-major from the zone origin: cell_id = row * n_cols + col.
    """

    zone: Zone
    cell_size: float

    def __post_init__(self):
        if self.cell_size <= 0:
            raise NonDividingCellSize(f"cell size must be positive, got {self.cell_size}")
        for name, extent in (("width", self.zone.width), ("height", self.zone.height)):
            n = extent / self.cell_size
            if abs(n - round(n)) > 1e-9 or round(n) < 1:
                raise NonDividingCellSize(
                    f"cell size {self.cell_size} does not divide zone {name} {extent}"
                )

    @property
    def n_cols(self) -> int:
        return round(self.zone.width / self.cell_size)

    @property
    def n_rows(self) -> int:
        return round(self.zone.height / self.cell_size)

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    def centroid(self, cell_id: int) -> Point2D:
        if not (0 <= cell_id < self.n_cells):
            raise ValueError(f"cell_id {cell_id} outside [0, {self.n_cells})")
        row, col = divmod(cell_id, self.n_cols)
        return Point2D(
            self.zone.origin.x + (col + 0.5) * self.cell_size,
            self.zone.origin.y + (row + 0.5) * self.cell_size,
        )

    def centroids(self) -> list[Point2D]:
        return [self.centroid(i) for i in range(self.n_cells)]

    def cell_of(self, p: Point2D) -> int:
        """Cell containing p; points on the far edges belong to the last cell."""
        if not self.zone.contains(p):
            raise OutOfZone(f"point ({p.x}, {p.y}) lies outside the zone")
        col = min(int((p.x - self.zone.origin.x) / self.cell_size), self.n_cols - 1)
        row = min(int((p.y - self.zone.origin.y) / self.cell_size), self.n_rows - 1)
        return row * self.n_cols + col


def make_grid(zone: Zone, cell_size: float) -> Grid:
    return Grid(zone, cell_size)


@dataclass(frozen=True)
class ReferenceGroup:
    """A named set of reference points under one selection strategy."""

    strategy: str
    group_label: str
    points: tuple[Point2D, ...]

    def __post_init__(self):
        if self.strategy in (STRATEGY_TDT, STRATEGY_TNT) and len(self.points) != 2:
            raise ValueError(f"{self.strategy} groups contain exactly 2 points")
        if self.strategy == STRATEGY_CT and set(self.points) != _CT_POINTS:
            raise ValueError("CT uses exactly the four corner-adjacent reference points")

    @property
    def key(self) -> str:
        return self.group_label.lower()


def builtin_reference_groups() -> list[ReferenceGroup]:
    """The five reference-point groups of the TDT/TNT/CT strategies."""
    return [
        ReferenceGroup(STRATEGY_TDT, "TDT-G1", (Point2D(750.0, 500.0), Point2D(900.0, 100.0))),
        ReferenceGroup(STRATEGY_TDT, "TDT-G2", (Point2D(100.0, 1900.0), Point2D(900.0, 100.0))),
        ReferenceGroup(STRATEGY_TNT, "TNT-G1", (Point2D(900.0, 1900.0), Point2D(900.0, 100.0))),
        ReferenceGroup(STRATEGY_TNT, "TNT-G2", (Point2D(750.0, 1500.0), Point2D(750.0, 500.0))),
        ReferenceGroup(
            STRATEGY_CT,
            "CT",
            (_CT_LOWER_LEFT, _CT_UPPER_LEFT, _CT_LOWER_RIGHT, _CT_UPPER_RIGHT),
        ),
    ]


def reference_group(key: str) -> ReferenceGroup:
    """Look up a builtin group by its CLI key (tdt-g1, ..., ct)."""
    for group in builtin_reference_groups():
        if group.key == key.lower():
            return group
    known = ", ".join(g.key for g in builtin_reference_groups())
    raise ValueError(f"unknown strategy group {key!r}; expected one of: {known}")


def ct_subzone(point: Point2D, zone: Zone) -> str:
    """CT subzone of a point: left of the vertical midline, or right (ties right)."""
    if not zone.contains(point):
        raise OutOfZone(f"point ({point.x}, {point.y}) lies outside the zone")
    split_x = zone.origin.x + zone.width / 2.0
    return SUBZONE_LEFT if point.x < split_x else SUBZONE_RIGHT


_Triple = tuple[LinearDistortion, LinearDistortion, LinearDistortion]


@dataclass(frozen=True)
class CoefficientSet:
    """Fitted (a, b) coefficients under one strategy, plus provenance.

    TDT/TNT carry one fit per anchor (`uniform`); CT carries one averaged fit
    per subzone, replicated across anchors (`left`/`right`).
    """

    strategy: str
    group_label: str
    uniform: _Triple | None
    left: _Triple | None
    right: _Triple | None
    residual_rms: tuple[float, float, float]
    n_repeats: int

    def per_anchor_for(self, point: Point2D, zone: Zone) -> _Triple:
        """Coefficients governing a given location."""
        if self.uniform is not None:
            return self.uniform
        side = ct_subzone(point, zone)
        return self.left if side == SUBZONE_LEFT else self.right

    def to_dict(self) -> dict:
        def enc(triple):
            return None if triple is None else [{"a": d.a, "b": d.b} for d in triple]

        return {
            "strategy": self.strategy,
            "group_label": self.group_label,
            "uniform": enc(self.uniform),
            "left": enc(self.left),
            "right": enc(self.right),
            "residual_rms_mm": list(self.residual_rms),
            "n_repeats": self.n_repeats,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientSet":
        def dec(items):
            if items is None:
                return None
            return tuple(LinearDistortion(d["a"], d["b"]) for d in items)

        return cls(
            strategy=data["strategy"],
            group_label=data["group_label"],
            uniform=dec(data["uniform"]),
            left=dec(data["left"]),
            right=dec(data["right"]),
            residual_rms=tuple(data["residual_rms_mm"]),
            n_repeats=data["n_repeats"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CoefficientSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_strategy_coefficients(
    group: ReferenceGroup,
    anchors: AnchorSet,
    measured_means: Mapping[Point2D, tuple[float, float, float]],
    n_repeats: int = 1,
) -> CoefficientSet:
    """Fit the measurement model from a group's averaged reference measurements.

    TDT/TNT fit each anchor independently over the group's two points. CT fits
    three diagonal pairs against specific anchors: upper-left/lower-right
    against a1 and lower-left/upper-right against a0 are averaged into the
    left-subzone coefficients; lower-right/upper-right against a2 become the
    right-subzone coefficients. Subzone coefficients apply to all anchors.
    """
    for p in group.points:
        if p not in measured_means:
            raise KeyError(f"measured means missing for reference point ({p.x}, {p.y})")

    if group.strategy in (STRATEGY_TDT, STRATEGY_TNT):
        reference = [(p, measured_means[p]) for p in group.points]
        fit = fit_anchors(reference, anchors, n_repeats)
        return CoefficientSet(
            strategy=group.strategy,
            group_label=group.group_label,
            uniform=fit.per_anchor,
            left=None,
            right=None,
            residual_rms=fit.residual_rms,
            n_repeats=fit.n_repeats,
        )

    def pair_fit(points: Sequence[Point2D], anchor_index: int) -> tuple[LinearDistortion, float]:
        anchor = anchors.as_tuple()[anchor_index]
        pairs = [
            (euclidean_distance(p, anchor), measured_means[p][anchor_index]) for p in points
        ]
        model = fit_linear_model(pairs)
        return model, fit_residual_rms(pairs, model)

    l1, rms_l1 = pair_fit((_CT_UPPER_LEFT, _CT_LOWER_RIGHT), 1)
    l2, rms_l2 = pair_fit((_CT_LOWER_LEFT, _CT_UPPER_RIGHT), 0)
    left = LinearDistortion((l1.a + l2.a) / 2.0, (l1.b + l2.b) / 2.0)
    right, rms_r = pair_fit((_CT_LOWER_RIGHT, _CT_UPPER_RIGHT), 2)
    return CoefficientSet(
        strategy=STRATEGY_CT,
        group_label=group.group_label,
        uniform=None,
        left=(left, left, left),
        right=(right, right, right),
        residual_rms=(rms_l2, rms_l1, rms_r),
        n_repeats=n_repeats,
    )


@dataclass(frozen=True)
class DistanceDatabase:
    """Predicted measured-distance triple for every grid cell."""

    grid: Grid
    entries: tuple[tuple[float, float, float], ...]
    provenance: CoefficientSet | None = None

    def __post_init__(self):
        if len(self.entries) != self.grid.n_cells:
            raise GridMismatch(
                f"database has {len(self.entries)} entries for {self.grid.n_cells} cells"
            )


def generate_database(grid: Grid, anchors: AnchorSet, coefficients: CoefficientSet) -> DistanceDatabase:
    """Predict the measured triple at every cell centroid; deterministic, no noise."""
    entries = []
    for centroid in grid.centroids():
        per_anchor = coefficients.per_anchor_for(centroid, grid.zone)
        triple = []
        for anchor, dist in zip(anchors.as_tuple(), per_anchor):
            predicted = dist.apply(euclidean_distance(centroid, anchor))
            triple.append(max(0.0, predicted))
        entries.append(tuple(triple))
    return DistanceDatabase(grid, tuple(entries), coefficients)


def write_database_csv(db: DistanceDatabase, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(DATABASE_CSV_HEADER + "\n")
        for cell_id, triple in enumerate(db.entries):
            c = db.grid.centroid(cell_id)
            fh.write(
                f"{cell_id},{c.x!r},{c.y!r},{triple[0]!r},{triple[1]!r},{triple[2]!r}\n"
            )


def read_database_csv(path: str | Path, grid: Grid) -> DistanceDatabase:
    """Load a database CSV, validating it against the configured grid."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != DATABASE_CSV_HEADER:
        raise ValueError(f"unexpected database CSV header in {path}")
    rows = lines[1:]
    if not rows:
        raise EmptyDatabase(f"database file {path} holds no entries")
    if len(rows) != grid.n_cells:
        raise GridMismatch(f"{path} has {len(rows)} entries but the grid has {grid.n_cells} cells")
    entries: list[tuple[float, float, float]] = []
    for expected_id, row in enumerate(rows):
        cell_id, cx, cy, f0, f1, f2 = row.split(",")
        if int(cell_id) != expected_id:
            raise GridMismatch(f"{path} rows are not sorted by cell_id")
        centroid = grid.centroid(expected_id)
        if not math.isclose(float(cx), centroid.x, abs_tol=1e-6) or not math.isclose(
            float(cy), centroid.y, abs_tol=1e-6
        ):
            raise GridMismatch(f"{path} centroid of cell {cell_id} does not match the grid")
        entries.append((float(f0), float(f1), float(f2)))
    return DistanceDatabase(grid, tuple(entries))

"""Trilateration-vs-network comparison, MC sweeps, and report emission.

One experiment run simulates (or ingests) repeated measurements at each test
point, optionally MC-scales them, localizes every repeat with both methods,
and aggregates mean error distances and the improvement percentage.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bpnet import TrainedModel, classify
from .errors import EmptyInput, InsufficientData, ZeroBaseline
from .geometry import AnchorSet, Point2D, error_distance, trilaterate
from .ranging import (
    LinearDistortion,
    NoiseSpec,
    RangingSample,
    apply_mc_scaling,
    simulate_measurement,
)

#: Seed-stream tags so reference and test measurements never share draws.
REFERENCE_STREAM = 0
TEST_STREAM = 1

#: Six-point test layout; three are named by the experiment write-up, the
#: rest are symmetric fill-ins (see synthetic_test_point_ids).
DEFAULT_TEST_POINTS = (
    Point2D(250.0, 500.0),
    Point2D(750.0, 500.0),
    Point2D(250.0, 1000.0),
    Point2D(750.0, 1000.0),
    Point2D(250.0, 1500.0),
    Point2D(750.0, 1500.0),
)

PAPER_NAMED_TEST_POINTS = frozenset(
    {Point2D(250.0, 500.0), Point2D(750.0, 500.0), Point2D(750.0, 1500.0)}
)


def point_rng(master_seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for one point's measurement stream."""
    return np.random.default_rng([master_seed, stream, index])


def synthetic_test_point_ids(test_points: Sequence[Point2D]) -> list[int]:
    """Indices of test points that are fill-ins rather than named ones."""
    return [i for i, p in enumerate(test_points) if p not in PAPER_NAMED_TEST_POINTS]


def mean_error(errors: Sequence[float]) -> float:
    """Arithmetic mean of error distances."""
    if len(errors) == 0:
        raise EmptyInput("cannot average an empty error list")
    return sum(errors) / len(errors)


def improvement_percent(baseline: float, candidate: float) -> float:
    """Percent error reduction of candidate over baseline (negative if worse)."""
    if baseline <= 0:
        raise ZeroBaseline(f"baseline mean error must be > 0, got {baseline}")
    return 100.0 * (baseline - candidate) / baseline


@dataclass(frozen=True)
class TestPointResult:
    """Per-point outcome, averaged over repeats.

    Errors are means of per-repeat error distances; trilat_estimate is the
    mean estimate and nn_cell the modal classified cell (its centroid as
    nn_estimate). At repeats=1 each error equals the error distance of the
    stored estimate.
    """

    point_id: int
    truth: Point2D
    trilat_estimate: Point2D
    trilat_error: float
    nn_cell: int
    nn_estimate: Point2D
    nn_error: float


@dataclass
class EvaluationReport:
    label: str
    results: list[TestPointResult]
    mean_trilat_error: float
    mean_nn_error: float
    improvement: float | None
    config_echo: dict = field(default_factory=dict)


def _rows_for_point(
    ingest: Sequence[RangingSample], point: Point2D, repeats: int
) -> list[tuple[float, float, float]]:
    rows = [
        s.measured
        for s in ingest
        if abs(s.true_pos.x - point.x) < 1e-6 and abs(s.true_pos.y - point.y) < 1e-6
    ]
    if len(rows) < repeats:
        raise InsufficientData(
            f"point ({point.x}, {point.y}) has {len(rows)} ingested rows, need {repeats}"
        )
    return rows[:repeats]


def run_experiment(
    anchors: AnchorSet,
    distortion: Sequence[LinearDistortion],
    noise: NoiseSpec,
    trained: TrainedModel,
    test_points: Sequence[Point2D] = DEFAULT_TEST_POINTS,
    repeats: int = 300,
    k_percent: float | None = None,
    label: str = "baseline",
    ingest: Sequence[RangingSample] | None = None,
    config_echo: dict | None = None,
) -> EvaluationReport:
    """Full online-phase evaluation over the test points.

    Measurements are simulated per point from independent generators derived
    from (noise.seed, TEST_STREAM, point index), or taken from `ingest`. MC
    scaling, when enabled, applies to test-time measurements only.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    zone = trained.grid.zone
    for p in test_points:
        if not zone.contains(p):
            raise ValueError(f"test point ({p.x}, {p.y}) lies outside the zone")

    results = []
    for idx, point in enumerate(test_points):
        if ingest is None:
            rng = point_rng(noise.seed, TEST_STREAM, idx)
            rows = [
                simulate_measurement(point, anchors, distortion, noise, rng).measured
                for _ in range(repeats)
            ]
        else:
            rows = _rows_for_point(ingest, point, repeats)

        trilat_errs = []
        nn_errs = []
        est_x = est_y = 0.0
        cells = Counter()
        for measured in rows:
            if k_percent is not None:
                measured = tuple(apply_mc_scaling(m, k_percent) for m in measured)
            est = trilaterate(anchors, measured)
            trilat_errs.append(error_distance(est, point))
            est_x += est.x
            est_y += est.y
            cell, nn_est = classify(trained, measured)
            cells[cell] += 1
            nn_errs.append(error_distance(nn_est, point))

        modal_cell = min(cells.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        results.append(
            TestPointResult(
                point_id=idx,
                truth=point,
                trilat_estimate=Point2D(est_x / repeats, est_y / repeats),
                trilat_error=mean_error(trilat_errs),
                nn_cell=modal_cell,
                nn_estimate=trained.grid.centroid(modal_cell),
                nn_error=mean_error(nn_errs),
            )
        )

    mean_trilat = mean_error([r.trilat_error for r in results])
    mean_nn = mean_error([r.nn_error for r in results])
    improvement = improvement_percent(mean_trilat, mean_nn) if mean_trilat > 0 else None
    echo = {
        "k_percent": k_percent,
        "seed": noise.seed,
        "sigma_mm": noise.sigma,
        "cell_size_mm": trained.grid.cell_size,
        "repeats": repeats,
        "n_points": len(test_points),
        "synthetic_point_ids": synthetic_test_point_ids(test_points),
    }
    if config_echo:
        echo.update(config_echo)
    return EvaluationReport(label, results, mean_trilat, mean_nn, improvement, echo)


def mc_sweep(
    anchors: AnchorSet,
    distortion: Sequence[LinearDistortion],
    noise: NoiseSpec,
    trained: TrainedModel,
    k_values: Sequence[float],
    test_points: Sequence[Point2D] = DEFAULT_TEST_POINTS,
    repeats: int = 300,
    ingest: Sequence[RangingSample] | None = None,
    config_echo: dict | None = None,
) -> list[EvaluationReport]:
    """A no-MC baseline plus one report per K, all over the same seed stream."""

    def run(k: float | None, label: str) -> EvaluationReport:
        return run_experiment(
            anchors, distortion, noise, trained, test_points, repeats, k, label, ingest, config_echo
        )

    reports = [run(None, "baseline")]
    for k in k_values:
        reports.append(run(k, f"k{k:g}"))
    return reports


PER_POINT_HEADER = "point_id,x_mm,y_mm,trilat_err_mm,nn_err_mm"
SUMMARY_HEADER = (
    "label,strategy,group,k_percent,seed,sigma_mm,cell_size_mm,repeats,n_points,"
    "synthetic_point_ids,mean_trilat_err_mm,mean_nn_err_mm,improvement_percent"
)
PLOT_DATA_HEADER = "label,point_id,method,err_mm"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_reports(reports: Sequence[EvaluationReport], out_dir: str | Path) -> list[Path]:
    """Write per-point CSVs, the shared summary CSV, and the plot-data file.

    Deterministic: stable point ordering, repr float formatting, LF endings.
    Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for report in reports:
        path = out / f"per_point_{report.label}.csv"
        lines = [PER_POINT_HEADER]
        for r in sorted(report.results, key=lambda r: r.point_id):
            lines.append(
                f"{r.point_id},{_fmt(r.truth.x)},{_fmt(r.truth.y)},"
                f"{_fmt(r.trilat_error)},{_fmt(r.nn_error)}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    summary = out / "summary.csv"
    lines = [SUMMARY_HEADER]
    for report in reports:
        echo = report.config_echo
        synth = ";".join(str(i) for i in echo.get("synthetic_point_ids", []))
        lines.append(
            ",".join(
                [
                    report.label,
                    str(echo.get("strategy", "")),
                    str(echo.get("group", "")),
                    _fmt(echo.get("k_percent")),
                    _fmt(echo.get("seed")),
                    _fmt(echo.get("sigma_mm")),
                    _fmt(echo.get("cell_size_mm")),
                    _fmt(echo.get("repeats")),
                    _fmt(echo.get("n_points")),
                    synth,
                    _fmt(report.mean_trilat_error),
                    _fmt(report.mean_nn_error),
                    _fmt(report.improvement),
                ]
            )
        )
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(summary)

    plot = out / "plot_data.csv"
    lines = [PLOT_DATA_HEADER]
    for report in reports:
        for r in sorted(report.results, key=lambda r: r.point_id):
            lines.append(f"{report.label},{r.point_id},trilateration,{_fmt(r.trilat_error)}")
            lines.append(f"{report.label},{r.point_id},bpnn,{_fmt(r.nn_error)}")
    plot.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(plot)
    return written


def _report_to_dict(report: EvaluationReport) -> dict:
    return {
        "label": report.label,
        "mean_trilat_error_mm": report.mean_trilat_error,
        "mean_nn_error_mm": report.mean_nn_error,
        "improvement_percent": report.improvement,
        "config_echo": report.config_echo,
        "results": [
            {
                "point_id": r.point_id,
                "x_mm": r.truth.x,
                "y_mm": r.truth.y,
                "trilat_x_mm": r.trilat_estimate.x,
                "trilat_y_mm": r.trilat_estimate.y,
                "trilat_err_mm": r.trilat_error,
                "nn_cell": r.nn_cell,
                "nn_x_mm": r.nn_estimate.x,
                "nn_y_mm": r.nn_estimate.y,
                "nn_err_mm": r.nn_error,
            }
            for r in report.results
        ],
    }


def _report_from_dict(data: dict) -> EvaluationReport:
    results = [
        TestPointResult(
            point_id=r["point_id"],
            truth=Point2D(r["x_mm"], r["y_mm"]),
            trilat_estimate=Point2D(r["trilat_x_mm"], r["trilat_y_mm"]),
            trilat_error=r["trilat_err_mm"],
            nn_cell=r["nn_cell"],
            nn_estimate=Point2D(r["nn_x_mm"], r["nn_y_mm"]),
            nn_error=r["nn_err_mm"],
        )
        for r in data["results"]
    ]
    return EvaluationReport(
        label=data["label"],
        results=results,
        mean_trilat_error=data["mean_trilat_error_mm"],
        mean_nn_error=data["mean_nn_error_mm"],
        improvement=data["improvement_percent"],
        config_echo=data["config_echo"],
    )


def save_reports_json(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    payload = [_report_to_dict(r) for r in reports]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_reports_json(path: str | Path) -> list[EvaluationReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [_report_from_dict(d) for d in data]

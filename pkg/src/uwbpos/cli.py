"""Command-line pipeline: simulate -> calibrate -> gendb -> train -> evaluate -> report.

Files are the only contract between commands, so every stage can be replayed
on real hardware logs. Exit codes: 0 success, 1 validation error, 2 IO error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bpnet, evaluation, fingerprint, ranging
from .config import PipelineConfig, config_keys_help, load_config
from .errors import GridMismatch, MissingReferencePoint, UwbposError
from .geometry import Point2D

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwbpos",
        description="UWB TOA positioning pipeline: measurement simulation, "
        "calibration, fingerprint database generation, BP network training, "
        "and trilateration-vs-network evaluation.",
        epilog="config file keys:\n" + config_keys_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="pipeline config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--strategy",
            choices=["tdt-g1", "tdt-g2", "tnt-g1", "tnt-g2", "ct"],
            default=None,
            help="override the config strategy group",
        )

    p = sub.add_parser("simulate", help="emit a measurement CSV for reference or test points")
    add_common(p)
    p.add_argument("--out", required=True, help="output measurement CSV path")
    p.add_argument(
        "--points",
        choices=["reference", "test"],
        default="reference",
        help="which point set to measure (default: reference)",
    )

    p = sub.add_parser("calibrate", help="fit per-anchor (a, b) from reference measurements")
    add_common(p)
    p.add_argument("--measurements", required=True, help="input measurement CSV")
    p.add_argument("--out", required=True, help="output coefficients file (JSON)")

    p = sub.add_parser("gendb", help="generate the fingerprint distance database")
    add_common(p)
    p.add_argument("--coefficients", required=True, help="input coefficients file")
    p.add_argument("--out", required=True, help="output database CSV path")

    p = sub.add_parser("train", help="train the BP network on a database CSV")
    add_common(p)
    p.add_argument("--database", required=True, help="input database CSV")
    p.add_argument("--out", required=True, help="output model file (JSON)")

    p = sub.add_parser("evaluate", help="compare trilateration and the BP network")
    add_common(p)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--out", required=True, help="output report directory")
    p.add_argument("--k", default=None, help="comma-separated MC percentages, e.g. 90,85,80")
    p.add_argument(
        "--measurements", default=None, help="ingest test measurements instead of simulating"
    )

    p = sub.add_parser("report", help="re-emit report CSVs from a saved report.json")
    p.add_argument("--reports", required=True, help="report.json written by evaluate")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _apply_strategy_override(config: PipelineConfig, strategy: str | None) -> PipelineConfig:
    if strategy is None:
        return config
    from dataclasses import replace

    fingerprint.reference_group(strategy)
    return replace(config, strategy_key=strategy)


def _cmd_simulate(args) -> int:
    config = _apply_strategy_override(load_config(args.config, args.seed), args.strategy)
    if args.points == "reference":
        points = config.group().points
        prefix, stream = "rp", evaluation.REFERENCE_STREAM
    else:
        points = config.test_points
        prefix, stream = "tp", evaluation.TEST_STREAM
    samples = []
    for idx, point in enumerate(points):
        rng = evaluation.point_rng(config.seed, stream, idx)
        samples.extend(
            ranging.simulate_repeats(
                f"{prefix}{idx}", point, config.anchors, config.distortion,
                config.noise(), config.repeats, rng,
            )
        )
    ranging.write_measurement_csv(args.out, samples)
    print(f"wrote {len(samples)} rows ({len(points)} points x {config.repeats} repeats) to {args.out}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    config = _apply_strategy_override(load_config(args.config, args.seed), args.strategy)
    group = config.group()
    samples = ranging.read_measurement_csv(args.measurements)

    by_id: dict[str, list[ranging.RangingSample]] = {}
    for s in samples:
        by_id.setdefault(s.point_id, []).append(s)

    measured_means: dict[Point2D, tuple[float, float, float]] = {}
    counts: list[int] = []
    for point in group.points:
        match = None
        for rows in by_id.values():
            pos = rows[0].true_pos
            if abs(pos.x - point.x) < 1e-6 and abs(pos.y - point.y) < 1e-6:
                match = rows
                break
        if match is None:
            raise MissingReferencePoint(
                f"measurements lack reference point ({point.x:g}, {point.y:g}) "
                f"required by {group.group_label}"
            )
        measured_means[point] = ranging.average_measurements(match)
        counts.append(len(match))

    coeffs = fingerprint.fit_strategy_coefficients(
        group, config.anchors, measured_means, n_repeats=min(counts)
    )
    coeffs.save(args.out)
    print(f"fitted {group.group_label} coefficients from {min(counts)} repeats -> {args.out}")
    return EXIT_OK


def _cmd_gendb(args) -> int:
    config = load_config(args.config, args.seed)
    coeffs = fingerprint.CoefficientSet.load(args.coefficients)
    db = fingerprint.generate_database(config.grid(), config.anchors, coeffs)
    fingerprint.write_database_csv(db, args.out)
    print(f"wrote {db.grid.n_cells}-cell database ({coeffs.group_label}) to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = load_config(args.config, args.seed)
    db = fingerprint.read_database_csv(args.database, config.grid())
    result = bpnet.train(db, config.train_config(), config.augmentation())
    bpnet.save_model(result.trained, args.out)
    print(
        f"final training loss {result.loss_history[-1]:.6f}, "
        f"accuracy {result.train_accuracy:.1%} -> {args.out}"
    )
    return EXIT_OK


def _parse_k_list(raw: str) -> list[float]:
    try:
        values = [float(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise UwbposError(f"--k expects comma-separated numbers: {exc}") from exc
    if not values:
        raise UwbposError("--k was given but holds no values")
    return values


def _cmd_evaluate(args) -> int:
    config = _apply_strategy_override(load_config(args.config, args.seed), args.strategy)
    trained = bpnet.load_model(args.model)
    expected = config.grid()
    if trained.grid != expected:
        raise GridMismatch(
            f"model grid ({trained.grid.zone}, cell {trained.grid.cell_size}) does not match "
            f"the configured grid ({expected.zone}, cell {expected.cell_size})"
        )

    ingest = None
    if args.measurements is not None:
        ingest = ranging.read_measurement_csv(args.measurements)

    group = config.group()
    echo = {"strategy": group.strategy, "group": group.group_label}
    common = dict(
        anchors=config.anchors,
        distortion=config.distortion,
        noise=config.noise(),
        trained=trained,
        test_points=config.test_points,
        repeats=config.repeats,
        ingest=ingest,
        config_echo=echo,
    )
    if args.k is not None:
        reports = evaluation.mc_sweep(k_values=_parse_k_list(args.k), **common)
    elif config.k_percent is not None:
        reports = [evaluation.run_experiment(k_percent=config.k_percent, label=f"k{config.k_percent:g}", **common)]
    else:
        reports = [evaluation.run_experiment(**common)]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.save_reports_json(reports, out_dir / "report.json")
    evaluation.emit_reports(reports, out_dir)
    for r in reports:
        imp = f"{r.improvement:.1f}%" if r.improvement is not None else "n/a"
        print(
            f"{r.label}: mean trilateration error {r.mean_trilat_error:.1f} mm, "
            f"mean BPNN error {r.mean_nn_error:.1f} mm, improvement {imp}"
        )
    return EXIT_OK


def _cmd_report(args) -> int:
    reports = evaluation.load_reports_json(args.reports)
    written = evaluation.emit_reports(reports, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "gendb": _cmd_gendb,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are validation failures here.
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION

    try:
        return _COMMANDS[args.command](args)
    except UwbposError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        path = getattr(exc, "filename", None)
        where = f" ({path})" if path else ""
        print(f"io error{where}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Measured-vs-real distance model: simulation, fitting, and MC scaling.

The measurement model is linear: measured = a * real + b, with optional
additive zero-mean Gaussian noise. Fitting recovers (a, b) from reference
points with known coordinates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFit, EmptyInput, InvalidK, InvalidSlope
from .geometry import AnchorSet, Point2D, euclidean_distance

#: Measured distances above this are systematically inflated and get MC-scaled.
MC_THRESHOLD_MM = 1000.0

MEASUREMENT_CSV_HEADER = "point_id,x_true_mm,y_true_mm,d0_mm,d1_mm,d2_mm"


@dataclass(frozen=True)
class LinearDistortion:
    """Slope/offset pair of the measurement model, per anchor."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("distortion coefficients must be finite")
        if self.a <= 0:
            raise InvalidSlope(f"slope must be > 0, got a={self.a}")

    def apply(self, d_real: float) -> float:
        return self.a * d_real + self.b


IDENTITY_DISTORTION = LinearDistortion(1.0, 0.0)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive zero-mean Gaussian measurement noise, with its RNG seed."""

    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class RangingSample:
    """One TOA measurement round: distances from a known point to all anchors."""

    point_id: str
    true_pos: Point2D
    measured: tuple[float, float, float]

    def __post_init__(self):
        for d in self.measured:
            if not math.isfinite(d) or d < 0:
                raise ValueError(f"measured distances must be finite and >= 0, got {self.measured}")


@dataclass(frozen=True)
class CalibrationFit:
    """Per-anchor (a, b) fits plus fit quality bookkeeping."""

    per_anchor: tuple[LinearDistortion, LinearDistortion, LinearDistortion]
    residual_rms: tuple[float, float, float]
    n_repeats: int

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        if any(r < 0 for r in self.residual_rms):
            raise ValueError("residual RMS must be >= 0")


def simulate_measurement(
    true_pos: Point2D,
    anchors: AnchorSet,
    distortion: Sequence[LinearDistortion],
    noise: NoiseSpec,
    rng: np.random.Generator | None = None,
    point_id: str = "p",
) -> RangingSample:
    """Simulate one distorted, noisy TOA measurement to all three anchors.

    With rng=None a fresh generator is seeded from the NoiseSpec, so a single
    call is deterministic. Pass one generator across calls to draw a
    reproducible sequence. Negative draws clamp to 0.
    """
    if len(distortion) != 3:
        raise ValueError("one LinearDistortion per anchor is required")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    measured = []
    for anchor, dist in zip(anchors.as_tuple(), distortion):
        d_real = euclidean_distance(true_pos, anchor)
        m = dist.apply(d_real) + rng.normal(0.0, noise.sigma)
        measured.append(max(0.0, m))
    return RangingSample(point_id, true_pos, tuple(measured))


def simulate_repeats(
    point_id: str,
    true_pos: Point2D,
    anchors: AnchorSet,
    distortion: Sequence[LinearDistortion],
    noise: NoiseSpec,
    n: int,
    rng: np.random.Generator | None = None,
) -> list[RangingSample]:
    """Draw n measurement rounds for one point from a single seeded stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    return [simulate_measurement(true_pos, anchors, distortion, noise, rng, point_id) for _ in range(n)]


def fit_linear_model(reference_data: Sequence[tuple[float, float]]) -> LinearDistortion:
    """Fit measured = a * real + b from (d_real, d_test) pairs.

    Two entries solve the 2x2 system exactly; more entries use ordinary least
    squares. Raises DegenerateFit when every d_real coincides and InvalidSlope
    when the fitted slope is not positive.
    """
    if len(reference_data) < 2:
        raise ValueError("at least two reference entries are required")
    reals = [r for r, _ in reference_data]
    tests = [t for _, t in reference_data]
    if max(reals) - min(reals) == 0:
        raise DegenerateFit("all reference d_real values are equal; cannot fit a line")

    if len(reference_data) == 2:
        a = (tests[1] - tests[0]) / (reals[1] - reals[0])
        b = tests[0] - a * reals[0]
    else:
        r_mean = sum(reals) / len(reals)
        t_mean = sum(tests) / len(tests)
        sxx = sum((r - r_mean) ** 2 for r in reals)
        sxy = sum((r - r_mean) * (t - t_mean) for r, t in zip(reals, tests))
        a = sxy / sxx
        b = t_mean - a * r_mean
    if a <= 0:
        raise InvalidSlope(f"fitted slope a={a} is not positive")
    return LinearDistortion(a, b)


def fit_residual_rms(reference_data: Sequence[tuple[float, float]], model: LinearDistortion) -> float:
    """RMS of d_test residuals about the fitted line."""
    sq = [(t - model.apply(r)) ** 2 for r, t in reference_data]
    return math.sqrt(sum(sq) / len(sq))


def average_measurements(samples: Sequence[RangingSample]) -> tuple[float, float, float]:
    """Per-anchor arithmetic mean of the measured distances of one point."""
    if len(samples) == 0:
        raise EmptyInput("cannot average zero samples")
    ids = {s.point_id for s in samples}
    if len(ids) != 1:
        raise ValueError(f"samples mix point ids: {sorted(ids)}")
    n = len(samples)
    return tuple(sum(s.measured[i] for s in samples) / n for i in range(3))


def fit_anchors(
    reference: Sequence[tuple[Point2D, tuple[float, float, float]]],
    anchors: AnchorSet,
    n_repeats: int,
) -> CalibrationFit:
    """Fit one LinearDistortion per anchor from averaged reference measurements.

    Each reference entry pairs a known point with its per-anchor measured
    means; the real distances come from the point/anchor coordinates.
    """
    fits = []
    rms = []
    for i, anchor in enumerate(anchors.as_tuple()):
        pairs = [(euclidean_distance(p, anchor), means[i]) for p, means in reference]
        model = fit_linear_model(pairs)
        fits.append(model)
        rms.append(fit_residual_rms(pairs, model))
    return CalibrationFit(tuple(fits), tuple(rms), n_repeats)


def apply_mc_scaling(measured: float, k_percent: float) -> float:
    """Scale a measurement above 1000 mm down to K percent of its value."""
    if not (0 < k_percent <= 100):
        raise InvalidK(f"K must be in (0, 100], got {k_percent}")
    if measured < 0:
        raise ValueError(f"measured distance must be >= 0, got {measured}")
    if measured > MC_THRESHOLD_MM:
        return measured * k_percent / 100.0
    return measured


def write_measurement_csv(path: str | Path, samples: Iterable[RangingSample]) -> None:
    """Emit samples in the measurement CSV format (one row per repeat)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MEASUREMENT_CSV_HEADER.split(","))
        for s in samples:
            writer.writerow(
                [s.point_id, repr(s.true_pos.x), repr(s.true_pos.y)]
                + [repr(d) for d in s.measured]
            )


def read_measurement_csv(path: str | Path) -> list[RangingSample]:
    """Parse a measurement CSV back into samples, validating its header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MEASUREMENT_CSV_HEADER.split(","):
            raise ValueError(f"unexpected measurement CSV header in {path}: {header}")
        samples = []
        for row in reader:
            if not row:
                continue
            pid, x, y, d0, d1, d2 = row
            samples.append(
                RangingSample(pid, Point2D(float(x), float(y)), (float(d0), float(d1), float(d2)))
            )
    return samples

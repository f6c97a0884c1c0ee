"""Sectioned key-value pipeline configuration.

One static INI file describes the world (anchors, zone, grid), the simulated
distortion and noise, the strategy, and the training/evaluation knobs.
Unknown sections or keys are rejected; omitted keys take the documented
defaults. Module invariants are validated at load time.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, UwbposError
from .fingerprint import Grid, ReferenceGroup, make_grid, reference_group
from .geometry import AnchorSet, Point2D, Zone
from .ranging import LinearDistortion, NoiseSpec
from .bpnet import Augmentation, TrainConfig

DEFAULT_CONFIG_TEXT = """\
[anchors]
a0 = 0, 0
a1 = 0, 2000
a2 = 1000, 2000

[zone]
origin = 0, 0
width_mm = 1000
height_mm = 2000

[grid]
cell_size_mm = 100

[distortion]
a0 = 1.05, 50
a1 = 1.05, 50
a2 = 1.05, 50

[noise]
sigma_mm = 30
seed = 20240

[strategy]
group = ct

[mc]
k_percent =

[nn]
hidden_sizes = 64
learning_rate = 0.05
epochs = 500
batch_size = 32
init_range = 0.5
augment_replicas = 20
augment_sigma_mm = 30

[eval]
repeats = 300
test_points = 250,500; 750,500; 250,1000; 750,1000; 250,1500; 750,1500
"""

#: section -> {key: default-as-string}; None means the key is required.
CONFIG_SCHEMA: dict[str, dict[str, str | None]] = {
    "anchors": {"a0": "0, 0", "a1": "0, 2000", "a2": "1000, 2000"},
    "zone": {"origin": "0, 0", "width_mm": "1000", "height_mm": "2000"},
    "grid": {"cell_size_mm": "100"},
    "distortion": {"a0": "1, 0", "a1": "1, 0", "a2": "1, 0"},
    "noise": {"sigma_mm": "30", "seed": "20240"},
    "strategy": {"group": "ct"},
    "mc": {"k_percent": ""},
    "nn": {
        "hidden_sizes": "64",
        "learning_rate": "0.05",
        "epochs": "500",
        "batch_size": "32",
        "init_range": "0.5",
        "augment_replicas": "20",
        "augment_sigma_mm": "30",
    },
    "eval": {
        "repeats": "300",
        "test_points": "250,500; 750,500; 250,1000; 750,1000; 250,1500; 750,1500",
    },
}


def config_keys_help() -> str:
    """One line per config key, for --help output."""
    lines = []
    for section, keys in CONFIG_SCHEMA.items():
        for key, default in keys.items():
            shown = default if default else "(empty)"
            lines.append(f"  [{section}] {key} (default: {shown})")
    return "\n".join(lines)


def _parse_point(raw: str, where: str) -> Point2D:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected 'x, y', got {raw!r}")
    try:
        return Point2D(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_distortion(raw: str, where: str) -> LinearDistortion:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected 'a, b', got {raw!r}")
    try:
        return LinearDistortion(float(parts[0]), float(parts[1]))
    except (ValueError, UwbposError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_points_list(raw: str, where: str) -> tuple[Point2D, ...]:
    items = [chunk.strip() for chunk in raw.split(";") if chunk.strip()]
    if not items:
        raise ConfigError(f"{where}: at least one point is required")
    return tuple(_parse_point(item, where) for item in items)


@dataclass(frozen=True)
class PipelineConfig:
    anchors: AnchorSet
    zone: Zone
    cell_size: float
    distortion: tuple[LinearDistortion, LinearDistortion, LinearDistortion]
    sigma: float
    seed: int
    strategy_key: str
    k_percent: float | None
    hidden_sizes: tuple[int, ...]
    learning_rate: float
    epochs: int
    batch_size: int
    init_range: float
    augment_replicas: int
    augment_sigma: float
    repeats: int
    test_points: tuple[Point2D, ...]

    def grid(self) -> Grid:
        return make_grid(self.zone, self.cell_size)

    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.sigma, self.seed)

    def group(self) -> ReferenceGroup:
        return reference_group(self.strategy_key)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            hidden_sizes=self.hidden_sizes,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            init_range=self.init_range,
        )

    def augmentation(self) -> Augmentation | None:
        if self.augment_replicas == 0:
            return None
        return Augmentation(NoiseSpec(self.augment_sigma, self.seed), self.augment_replicas)


def load_config(path: str | Path, seed_override: int | None = None) -> PipelineConfig:
    """Parse and validate a pipeline config file.

    Raises ConfigError for unknown/invalid keys and OSError if the file is
    unreadable.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")

    def get(section: str, key: str) -> str:
        default = CONFIG_SCHEMA[section][key]
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    def get_number(section: str, key: str, cast, positive=False) -> float | int:
        raw = get(section, key)
        try:
            value = cast(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
        if positive and value <= 0:
            raise ConfigError(f"[{section}] {key} must be > 0, got {value}")
        return value

    try:
        anchors = AnchorSet(
            _parse_point(get("anchors", "a0"), "[anchors] a0"),
            _parse_point(get("anchors", "a1"), "[anchors] a1"),
            _parse_point(get("anchors", "a2"), "[anchors] a2"),
        )
        zone = Zone(
            _parse_point(get("zone", "origin"), "[zone] origin"),
            get_number("zone", "width_mm", float, positive=True),
            get_number("zone", "height_mm", float, positive=True),
        )
        cell_size = get_number("grid", "cell_size_mm", float, positive=True)
        make_grid(zone, cell_size)
        distortion = tuple(
            _parse_distortion(get("distortion", k), f"[distortion] {k}") for k in ("a0", "a1", "a2")
        )
        sigma = get_number("noise", "sigma_mm", float)
        if sigma < 0:
            raise ConfigError(f"[noise] sigma_mm must be >= 0, got {sigma}")
        seed = seed_override if seed_override is not None else get_number("noise", "seed", int)

        strategy_key = get("strategy", "group").lower()
        reference_group(strategy_key)

        raw_k = get("mc", "k_percent")
        k_percent = None if raw_k == "" else float(raw_k)
        if k_percent is not None and not (0 < k_percent <= 100):
            raise ConfigError(f"[mc] k_percent must be in (0, 100], got {k_percent}")

        hidden_raw = get("nn", "hidden_sizes")
        try:
            hidden_sizes = tuple(int(h.strip()) for h in hidden_raw.split(",") if h.strip())
        except ValueError as exc:
            raise ConfigError(f"[nn] hidden_sizes: {exc}") from exc

        augment_replicas = get_number("nn", "augment_replicas", int)
        if augment_replicas < 0:
            raise ConfigError(f"[nn] augment_replicas must be >= 0, got {augment_replicas}")
        augment_sigma = get_number("nn", "augment_sigma_mm", float)
        if augment_sigma < 0:
            raise ConfigError(f"[nn] augment_sigma_mm must be >= 0, got {augment_sigma}")

        config = PipelineConfig(
            anchors=anchors,
            zone=zone,
            cell_size=cell_size,
            distortion=distortion,
            sigma=sigma,
            seed=seed,
            strategy_key=strategy_key,
            k_percent=k_percent,
            hidden_sizes=hidden_sizes,
            learning_rate=get_number("nn", "learning_rate", float, positive=True),
            epochs=get_number("nn", "epochs", int, positive=True),
            batch_size=get_number("nn", "batch_size", int, positive=True),
            init_range=get_number("nn", "init_range", float, positive=True),
            augment_replicas=augment_replicas,
            augment_sigma=augment_sigma,
            repeats=get_number("eval", "repeats", int, positive=True),
            test_points=_parse_points_list(get("eval", "test_points"), "[eval] test_points"),
        )
        # Exercise the derived constructors so invariant violations surface now.
        config.train_config()
        config.augmentation()
        for p in config.test_points:
            if not zone.contains(p):
                raise ConfigError(f"[eval] test point ({p.x}, {p.y}) lies outside the zone")
        return config
    except ConfigError:
        raise
    except (UwbposError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

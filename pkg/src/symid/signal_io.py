"""Time-series loading, benchmark generation, and pipeline configuration.

The canonical on-disk series format is a UTF-8 CSV with a header row, one
sample per row, and a decimal point. A ``t`` column, when present, must be
evenly spaced; the sampling interval is taken as ``t[1] - t[0]``. Unevenly
sampled input is rejected rather than resampled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    DivergedTrajectory,
    MissingColumn,
    MissingFile,
    NonFiniteValue,
    PreconditionViolation,
    SchemaViolation,
    SeriesTooShort,
)

DIVERGENCE_BOUND = 1e6

# a state on the benchmark attractor (integrated 2000 time units from a
# generic start), so short default runs carry no transient
ATTRACTOR_X0 = (-3.7525574392684113, 0.7107777270259459, 0.03533023355757162)


@dataclass(eq=False)
class TimeSeries:
    """Scalar observable sampled at a fixed interval.

    Attributes:
        samples: 1-D float array, all finite, length >= 2.
        dt: sampling interval, > 0.
        label: short name of the observable.
    """

    samples: np.ndarray
    dt: float = 1.0
    label: str = "value"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or len(self.samples) < 2:
            raise PreconditionViolation("a time series needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise PreconditionViolation("time series samples must all be finite")
        if not (self.dt > 0):
            raise PreconditionViolation("sampling interval dt must be positive")
        self.samples.setflags(write=False)

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            np.array_equal(self.samples, other.samples)
            and self.dt == other.dt
            and self.label == other.label
        )


@dataclass
class RosslerParams:
    """Parameters for the benchmark chaotic system.

    The vector field is
        dx1/dt = -(x2 + x3)
        dx2/dt = x1 + a*x2
        dx3/dt = b + x3*(x1 - c)
    """

    a: float = 0.2
    b: float = 0.2
    c: float = 2.6
    x0: tuple[float, float, float] = ATTRACTOR_X0
    dt: float = 0.2
    n: int = 300

    def __post_init__(self):
        if not (self.dt > 0):
            raise PreconditionViolation("dt must be positive")
        if self.n < 2:
            raise PreconditionViolation("n must be at least 2")
        if len(tuple(self.x0)) != 3:
            raise PreconditionViolation("x0 must have exactly 3 coordinates")


def _rossler_rhs(state, a, b, c):
    x1, x2, x3 = state
    return np.array([-(x2 + x3), x1 + a * x2, b + x3 * (x1 - c)])


def generate_rossler(p: RosslerParams, bound: float = DIVERGENCE_BOUND):
    """Integrate the benchmark system with a fixed-step classical RK4 scheme.

    Returns three TimeSeries (x1, x2, x3) of length ``p.n``; the first sample
    of each equals the corresponding coordinate of ``p.x0``.

    Raises:
        DivergedTrajectory: if any coordinate exceeds ``bound`` in magnitude.
    """
    states = np.empty((p.n, 3))
    state = np.asarray(p.x0, dtype=float)
    states[0] = state
    h = p.dt
    for k in range(1, p.n):
        k1 = _rossler_rhs(state, p.a, p.b, p.c)
        k2 = _rossler_rhs(state + 0.5 * h * k1, p.a, p.b, p.c)
        k3 = _rossler_rhs(state + 0.5 * h * k2, p.a, p.b, p.c)
        k4 = _rossler_rhs(state + h * k3, p.a, p.b, p.c)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(state)) or np.any(np.abs(state) > bound):
            raise DivergedTrajectory(
                f"state exceeded magnitude bound {bound:g} at step {k}"
            )
        states[k] = state
    return tuple(
        TimeSeries(states[:, j].copy(), dt=p.dt, label=f"x{j + 1}")
        for j in range(3)
    )


def _parse_cell(raw, row, column):
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise NonFiniteValue(row, column, raw) from None
    if not math.isfinite(value):
        raise NonFiniteValue(row, column, raw)
    return value


def load_series(path, column="value"):
    """Load one column of a CSV file as a TimeSeries.

    ``column`` may be a header name or a 0-based integer index. If the file
    carries a ``t`` column (and it is not the one requested), the sampling
    interval is inferred from it and uneven spacing is rejected.

    Raises:
        MissingFile, MissingColumn, NonFiniteValue, SeriesTooShort.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesTooShort(0, 2) from None
        header = [h.strip() for h in header]
        if isinstance(column, int):
            if not 0 <= column < len(header):
                raise MissingColumn(f"column index {column} out of range ({len(header)} columns)")
            col_idx = column
        else:
            if column not in header:
                raise MissingColumn(f"column {column!r} not in header {header}")
            col_idx = header.index(column)
        label = header[col_idx]
        t_idx = header.index("t") if ("t" in header and header[col_idx] != "t") else None

        values, times = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if col_idx >= len(row):
                raise NonFiniteValue(row_no, label, None)
            values.append(_parse_cell(row[col_idx], row_no, label))
            if t_idx is not None:
                times.append(_parse_cell(row[t_idx], row_no, "t"))

    if len(values) < 2:
        raise SeriesTooShort(len(values), 2)

    dt = 1.0
    if times:
        steps = np.diff(times)
        dt = float(steps[0])
        if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-9 * max(abs(dt), 1.0)):
            raise PreconditionViolation(
                "time column is not evenly spaced; resampling is not supported"
            )
    return TimeSeries(np.array(values), dt=dt, label=label)


def write_series(path, ts: TimeSeries):
    """Write a TimeSeries in the canonical CSV format (columns t,<label>).

    Floats are printed with shortest round-trip precision, so
    ``load_series(write_series(path, ts), ts.label) == ts`` exactly.
    """
    if ts.label == "t":
        raise PreconditionViolation('series label "t" collides with the time column')
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", ts.label])
        for k, v in enumerate(ts.samples):
            writer.writerow([repr(k * ts.dt), repr(float(v))])
    return path


# --------------------------------------------------------------------------
# Pipeline configuration
# --------------------------------------------------------------------------

@dataclass
class EmbeddingSettings:
    dim: int = 3
    lag: int | str = "auto"  # positive int, or "auto" for the autocorrelation rule


@dataclass
class MarkerSettings:
    prominence: float = 0.0
    spacing: int = 4


@dataclass
class FragmentSettings:
    min_len: int = 5
    max_len: int = 50
    points: int = 60  # resampled point count per fragment


@dataclass
class SpectralSettings:
    pairs: int | None = None        # conjugate pairs used; default min(10, (points-1)//2)
    betas: list[float] | None = None  # per-pair weights; default halving schedule


@dataclass
class GaSettings:
    population: int = 200
    alpha: float = 0.3
    beta: float = 0.1
    stall_limit: int = 5
    max_iterations: int = 1000
    elitism: int = 2


@dataclass
class ModelSettings:
    enabled: bool = True
    basis: list[str] = field(default_factory=list)  # pure linear map by default
    ridge: float = 0.0


@dataclass
class GeneratorSettings:
    a: float = 0.2
    b: float = 0.2
    c: float = 2.6
    x0: list[float] = field(default_factory=lambda: list(ATTRACTOR_X0))
    dt: float = 0.2
    n: int = 300
    observable: str = "x3"


@dataclass
class PipelineConfig:
    """Fully-resolved pipeline settings; ``seed`` has no default on purpose."""

    seed: int
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    markers: MarkerSettings = field(default_factory=MarkerSettings)
    fragments: FragmentSettings = field(default_factory=FragmentSettings)
    spectral: SpectralSettings = field(default_factory=SpectralSettings)
    ga: GaSettings = field(default_factory=GaSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    generator: GeneratorSettings = field(default_factory=GeneratorSettings)

    def to_dict(self):
        def section(obj):
            return {f.name: getattr(obj, f.name) for f in fields(obj)}

        return {
            "seed": self.seed,
            "embedding": section(self.embedding),
            "markers": section(self.markers),
            "fragments": section(self.fragments),
            "spectral": section(self.spectral),
            "ga": section(self.ga),
            "model": section(self.model),
            "generator": section(self.generator),
        }

    def echo(self):
        """Render the effective configuration back in the config format."""
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _require(cond, path, message):
    if not cond:
        raise SchemaViolation(path, message)


def _build_section(cls, data, path):
    if data is None:
        data = {}
    _require(isinstance(data, dict), path, "expected a mapping")
    known = {f.name for f in fields(cls)}
    for key in data:
        _require(key in known, f"{path}.{key}", "unknown field")
    return cls(**data)


def config_from_dict(data) -> PipelineConfig:
    """Build and validate a PipelineConfig from a parsed config mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise SchemaViolation("<root>", "config document must be a mapping")
    known = {"seed", "embedding", "markers", "fragments", "spectral", "ga", "model", "generator"}
    for key in data:
        _require(key in known, key, "unknown section")
    _require("seed" in data, "seed", "required field is missing")
    seed = data["seed"]
    _require(isinstance(seed, int) and not isinstance(seed, bool), "seed", "must be an integer")

    cfg = PipelineConfig(
        seed=seed,
        embedding=_build_section(EmbeddingSettings, data.get("embedding"), "embedding"),
        markers=_build_section(MarkerSettings, data.get("markers"), "markers"),
        fragments=_build_section(FragmentSettings, data.get("fragments"), "fragments"),
        spectral=_build_section(SpectralSettings, data.get("spectral"), "spectral"),
        ga=_build_section(GaSettings, data.get("ga"), "ga"),
        model=_build_section(ModelSettings, data.get("model"), "model"),
        generator=_build_section(GeneratorSettings, data.get("generator"), "generator"),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig):
    """Check every field's documented range; resolve derived defaults in place."""
    e = cfg.embedding
    _require(isinstance(e.dim, int) and e.dim >= 1, "embedding.dim", "must be an integer >= 1")
    if e.lag != "auto":
        _require(isinstance(e.lag, int) and e.lag >= 1, "embedding.lag", 'must be "auto" or an integer >= 1')

    m = cfg.markers
    _require(isinstance(m.prominence, (int, float)) and m.prominence >= 0, "markers.prominence", "must be >= 0")
    _require(isinstance(m.spacing, int) and m.spacing >= 2, "markers.spacing", "must be an integer >= 2")

    f = cfg.fragments
    _require(isinstance(f.min_len, int) and f.min_len >= 2, "fragments.min_len", "must be an integer >= 2")
    _require(isinstance(f.max_len, int) and f.max_len >= 2, "fragments.max_len", "must be an integer >= 2")
    _require(f.min_len <= f.max_len, "fragments.min_len", "must not exceed fragments.max_len")
    _require(isinstance(f.points, int) and f.points >= 2, "fragments.points", "must be an integer >= 2")

    s = cfg.spectral
    max_pairs = (f.points - 1) // 2
    if s.pairs is None:
        s.pairs = min(10, max_pairs)
    _require(isinstance(s.pairs, int) and 1 <= s.pairs <= max_pairs,
             "spectral.pairs", f"must be an integer in 1..{max_pairs} for {f.points} points")
    if s.betas is None:
        s.betas = [2.0 ** (-i) for i in range(s.pairs)]
    _require(isinstance(s.betas, list) and len(s.betas) == s.pairs,
             "spectral.betas", f"must list exactly {s.pairs} weights")
    _require(all(isinstance(b, (int, float)) and b > 0 for b in s.betas),
             "spectral.betas", "all weights must be > 0")

    g = cfg.ga
    _require(isinstance(g.population, int) and g.population >= 2, "ga.population", "must be an integer >= 2")
    _require(0.0 <= g.alpha <= 1.0, "ga.alpha", "must lie in [0, 1]")
    _require(0.0 <= g.beta <= 1.0, "ga.beta", "must lie in [0, 1]")
    _require(isinstance(g.stall_limit, int) and g.stall_limit >= 1, "ga.stall_limit", "must be an integer >= 1")
    _require(isinstance(g.max_iterations, int) and g.max_iterations >= 1,
             "ga.max_iterations", "must be an integer >= 1")
    _require(isinstance(g.elitism, int) and 1 <= g.elitism < g.population,
             "ga.elitism", "must be an integer in 1..population-1")

    mo = cfg.model
    _require(isinstance(mo.enabled, bool), "model.enabled", "must be a boolean")
    _require(isinstance(mo.basis, list) and all(isinstance(b, str) for b in mo.basis),
             "model.basis", "must be a list of basis ids")
    _require(isinstance(mo.ridge, (int, float)) and mo.ridge >= 0, "model.ridge", "must be >= 0")

    gen = cfg.generator
    _require(isinstance(gen.dt, (int, float)) and gen.dt > 0, "generator.dt", "must be > 0")
    _require(isinstance(gen.n, int) and gen.n >= 2, "generator.n", "must be an integer >= 2")
    _require(isinstance(gen.x0, list) and len(gen.x0) == 3
             and all(isinstance(v, (int, float)) for v in gen.x0),
             "generator.x0", "must be a list of 3 numbers")
    _require(gen.observable in ("x1", "x2", "x3"), "generator.observable", "must be x1, x2 or x3")
    return cfg


def parse_config(path) -> PipelineConfig:
    """Parse a YAML config file into a fully-populated PipelineConfig.

    Raises:
        MissingFile: the path does not exist.
        SchemaViolation: unknown field, missing seed, or out-of-range value;
            the message names the offending field path.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SchemaViolation("<root>", f"not valid YAML: {exc}") from None
    return config_from_dict(data)

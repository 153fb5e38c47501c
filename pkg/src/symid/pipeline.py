"""Stage orchestration: sequence the pipeline, persist artifacts, emit a manifest.

Every stage reads and writes documented text formats in the output
directory, so stages compose through files and any contiguous range can be
re-run against cached upstream artifacts. Artifact digests are recorded in
``manifest.json``; a partial run verifies that the cached upstream files
still match the digests from the previous manifest before reusing them.

All floating-point output is written with round-trip precision and every
source of randomness flows from the single config seed, so re-running with
the same config produces byte-identical artifacts (the manifest's timing
fields are the one exception).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import embedding, fragments, geometry, model, selection, signal_io, spectral
from .errors import DataError, MissingFile, PreconditionViolation, SchemaViolation, SymidError

STAGES = (
    "acquire",
    "embed",
    "fragments",
    "normalize",
    "distances",
    "select",
    "identify",
    "simulate",
    "compare",
)

MODEL_STAGES = {"identify", "simulate", "compare"}


@dataclass
class InputSpec:
    """Where the scalar series comes from: the builtin generator or a file."""

    mode: str = "generate"  # "generate" | "file"
    path: str | None = None
    column: str | int = "value"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def parse_stage_range(text: str) -> tuple[str, str]:
    """Parse "A..B" (or a single stage name) into a contiguous stage range."""
    if ".." in text:
        first, _, last = text.partition("..")
    else:
        first = last = text
    first = first or STAGES[0]
    last = last or STAGES[-1]
    for name in (first, last):
        if name not in STAGES:
            raise SchemaViolation("stages", f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    if STAGES.index(first) > STAGES.index(last):
        raise SchemaViolation("stages", f"stage {first!r} comes after {last!r}")
    return first, last


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"required artifact missing: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _require_artifact(out: Path, name: str) -> Path:
    path = out / name
    if not path.is_file():
        raise MissingFile(f"required artifact missing: {path} (run the producing stage first)")
    return path


# --------------------------------------------------------------------------
# stage implementations; each returns the list of files it wrote
# --------------------------------------------------------------------------

def stage_acquire(cfg, out: Path, spec: InputSpec):
    if spec.mode == "generate":
        g = cfg.generator
        params = signal_io.RosslerParams(a=g.a, b=g.b, c=g.c, x0=tuple(g.x0), dt=g.dt, n=g.n)
        series = signal_io.generate_rossler(params)
        rows = [
            [repr(k * g.dt)] + [repr(float(s.samples[k])) for s in series]
            for k in range(g.n)
        ]
        _write_rows(out / "rossler.csv", ["t", "x1", "x2", "x3"], rows)
        observable = series[("x1", "x2", "x3").index(g.observable)]
        signal_io.write_series(out / "series.csv", observable)
        return ["rossler.csv", "series.csv"]
    ts = signal_io.load_series(spec.path, spec.column)
    if ts.label == "t":
        ts = signal_io.TimeSeries(ts.samples, ts.dt, "value")
    signal_io.write_series(out / "series.csv", ts)
    return ["series.csv"]


def stage_embed(cfg, out: Path, spec: InputSpec):
    ts = signal_io.load_series(_require_artifact(out, "series.csv"), column=1)
    lag = cfg.embedding.lag
    if lag == "auto":
        lag = embedding.estimate_lag(ts)
    traj = embedding.delay_embed(ts, cfg.embedding.dim, lag)
    embedding.write_trajectory(out / "trajectory.csv", traj)
    _write_json(out / "embedding.json", {
        "dim": cfg.embedding.dim,
        "lag": int(lag),
        "points": len(traj),
        "observable": ts.label,
        "dt": ts.dt,
    })
    return ["trajectory.csv", "embedding.json"]


def stage_fragments(cfg, out: Path, spec: InputSpec):
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    markers = fragments.place_markers(traj, cfg.markers.prominence, cfg.markers.spacing)
    _write_rows(out / "markers.csv", ["index", "kind"],
                [[int(i), k] for i, k in zip(markers.indices, markers.kinds)])
    overlay = [
        [int(i), k] + [repr(float(v)) for v in traj.points[i]]
        for i, k in zip(markers.indices, markers.kinds)
    ]
    _write_rows(out / "markers_overlay.csv",
                ["index", "kind"] + [f"x{j + 1}" for j in range(traj.dim)], overlay)

    pairs = fragments.enumerate_fragments(markers, cfg.fragments.min_len, cfg.fragments.max_len)
    _write_json(out / "fragments.json", {
        "m_pts": cfg.fragments.points,
        "contour_len": len(traj),
        "marker_count": len(markers),
        "count": len(pairs),
        "fragments": [
            {"id": k, "start": s, "end": e, "raw_len": e - s + 1}
            for k, (s, e) in enumerate(pairs)
        ],
    })
    return ["markers.csv", "markers_overlay.csv", "fragments.json"]


def _load_fragments(out: Path):
    doc = _read_json(_require_artifact(out, "fragments.json"))
    pairs = [(f["start"], f["end"]) for f in doc["fragments"]]
    return doc, pairs


def stage_normalize(cfg, out: Path, spec: InputSpec):
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    doc, pairs = _load_fragments(out)
    m_pts = doc["m_pts"]
    desc_rows, transforms = [], []
    for fid, (start, end) in enumerate(pairs):
        frag = fragments.resample_fragment(traj, start, end, m_pts)
        desc = geometry.normalize(frag)
        for row, point in enumerate(desc.points):
            desc_rows.append([fid, row] + [repr(float(v)) for v in point])
        transforms.append({
            "id": fid,
            "axis": [int(desc.axis_pair[0]), int(desc.axis_pair[1])],
            "m_norm": [float(v) for v in desc.norm_transform.ravel()],
        })
    _write_rows(out / "descriptors.csv",
                ["fragment", "row"] + [f"x{j + 1}" for j in range(traj.dim)], desc_rows)
    _write_json(out / "transforms.json", {"dim": traj.dim, "fragments": transforms})
    return ["descriptors.csv", "transforms.json"]


def _load_descriptors(out: Path, m_pts: int, dim: int):
    path = _require_artifact(out, "descriptors.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if len(data) % m_pts != 0:
        raise DataError(f"descriptor table has {len(data)} rows, not a multiple of {m_pts}")
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    count = len(data) // m_pts
    expected_fid = np.repeat(np.arange(count), m_pts)
    if not np.array_equal(data[:, 0], expected_fid):
        raise DataError("descriptor table is missing rows for some fragments")
    return list(data[:, 2 : 2 + dim].reshape(count, m_pts, dim))


def stage_distances(cfg, out: Path, spec: InputSpec):
    doc, _ = _load_fragments(out)
    traj_dim = _read_json(_require_artifact(out, "transforms.json"))["dim"]
    blocks = _load_descriptors(out, doc["m_pts"], traj_dim)
    weights = spectral.DistanceWeights(cfg.spectral.pairs, np.array(cfg.spectral.betas))
    sigs = [spectral.dft_points(b) for b in blocks]
    matrix = selection.pairwise_matrix(sigs, weights)
    np.savetxt(out / "matrix.csv", matrix, fmt="%.17g", delimiter=",")
    return ["matrix.csv"]


def _load_matrix(out: Path) -> np.ndarray:
    path = _require_artifact(out, "matrix.csv")
    return np.loadtxt(path, delimiter=",", ndmin=2)


def stage_select(cfg, out: Path, spec: InputSpec):
    doc, pairs = _load_fragments(out)
    matrix = _load_matrix(out)
    ga_cfg = selection.GaConfig(
        seed=cfg.seed,
        population=cfg.ga.population,
        alpha=cfg.ga.alpha,
        beta=cfg.ga.beta,
        stall_limit=cfg.ga.stall_limit,
        max_iterations=cfg.ga.max_iterations,
        elitism_count=cfg.ga.elitism,
    )
    winner, log = selection.select_optimal(pairs, matrix, ga_cfg,
                                           contour_len=doc["contour_len"])
    _write_rows(out / "ga_log.csv",
                ["generation", "best_fitness", "mean_fitness", "restarts_so_far"],
                [[g.generation, repr(g.best_fitness), repr(g.mean_fitness), g.restarts_so_far]
                 for g in log.generations])

    ids = list(winner.fragment_ids)
    lens = [pairs[i][1] - pairs[i][0] + 1 for i in ids]
    if len(ids) > 1:
        sub = matrix[np.ix_(ids, ids)]
        upper = sub[np.triu_indices(len(ids), k=1)]
        mean_d, max_d = float(upper.mean()), float(upper.max())
    else:
        mean_d = max_d = 0.0
    _write_json(out / "winner.json", {
        "fragment_ids": ids,
        "fragments": [{"id": i, "start": pairs[i][0], "end": pairs[i][1]} for i in ids],
        "fitness": winner.fitness,
        "generation_born": winner.generation_born,
        "total_raw_len": int(sum(lens)),
        "mean_pairwise_distance": mean_d,
        "max_pairwise_distance": max_d,
        "restarts": log.restarts,
        "total_iterations": log.total_iterations,
    })

    outputs = ["ga_log.csv", "winner.json"]
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    for rank, fid in enumerate(ids):
        start, end = pairs[fid]
        name = f"winner_fragment_{rank:02d}.csv"
        _write_rows(out / name,
                    ["index"] + [f"x{j + 1}" for j in range(traj.dim)],
                    [[i] + [repr(float(v)) for v in traj.points[i]]
                     for i in range(start, end + 1)])
        outputs.append(name)
    return outputs


def stage_identify(cfg, out: Path, spec: InputSpec):
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    basis = model.build_basis(cfg.model.basis, traj.dim)
    fitted = model.fit_model(traj, basis, ridge=cfg.model.ridge)
    model.save_model(out / "model.json", fitted)
    return ["model.json"]


def stage_simulate(cfg, out: Path, spec: InputSpec):
    fitted = model.load_model(_require_artifact(out, "model.json"))
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    sim = model.simulate(fitted, traj.points[0], steps=len(traj) - 1)
    embedding.write_trajectory(out / "simulated.csv", sim)
    return ["simulated.csv"]


def stage_compare(cfg, out: Path, spec: InputSpec):
    fitted = model.load_model(_require_artifact(out, "model.json"))
    traj = embedding.read_trajectory(_require_artifact(out, "trajectory.csv"))
    sim = embedding.read_trajectory(_require_artifact(out, "simulated.csv"))
    metrics = model.compare(traj, sim, model=fitted)
    series_rows = [
        [t] + [repr(float(v)) for v in traj.points[t]] + [repr(float(v)) for v in sim.points[t]]
        for t in range(min(len(traj), len(sim)))
    ]
    header = (["t"] + [f"orig_x{j + 1}" for j in range(traj.dim)]
              + [f"sim_x{j + 1}" for j in range(sim.dim)])
    _write_rows(out / "original_vs_simulated.csv", header, series_rows)
    _write_json(out / "comparison.json", {
        "free_run_rmse": metrics.free_run_rmse,
        "cloud_distance": metrics.cloud_distance,
        "one_step_rmse": metrics.one_step_rmse,
    })
    return ["original_vs_simulated.csv", "comparison.json"]


_STAGE_FNS = {
    "acquire": stage_acquire,
    "embed": stage_embed,
    "fragments": stage_fragments,
    "normalize": stage_normalize,
    "distances": stage_distances,
    "select": stage_select,
    "identify": stage_identify,
    "simulate": stage_simulate,
    "compare": stage_compare,
}

# artifacts each stage consumes from earlier stages (for cache verification)
_STAGE_NEEDS = {
    "acquire": (),
    "embed": ("series.csv",),
    "fragments": ("trajectory.csv",),
    "normalize": ("trajectory.csv", "fragments.json"),
    "distances": ("fragments.json", "descriptors.csv", "transforms.json"),
    "select": ("fragments.json", "matrix.csv", "trajectory.csv"),
    "identify": ("trajectory.csv",),
    "simulate": ("model.json", "trajectory.csv"),
    "compare": ("model.json", "trajectory.csv", "simulated.csv"),
}


def run_pipeline(cfg, input_spec: InputSpec | None = None, out_dir=".",
                 stages: str | tuple[str, str] = ("acquire", "compare")) -> dict:
    """Execute a contiguous stage range and write ``manifest.json``.

    Returns the manifest as a dict. Partial ranges verify cached upstream
    artifacts against the digests recorded by the previous manifest and
    refuse to reuse files that changed.
    """
    if input_spec is None:
        input_spec = InputSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(stages, str):
        stages = parse_stage_range(stages)
    first, last = stages
    lo, hi = STAGES.index(first), STAGES.index(last)
    selected = [s for s in STAGES[lo : hi + 1]
                if cfg.model.enabled or s not in MODEL_STAGES]
    if not selected:
        raise PreconditionViolation("stage range is empty (model stages disabled)")

    previous = None
    manifest_path = out / "manifest.json"
    if manifest_path.is_file():
        with open(manifest_path, encoding="utf-8") as fh:
            previous = json.load(fh)

    # verify cached upstream artifacts against the previous manifest
    needed = set()
    for name in selected:
        for artifact in _STAGE_NEEDS[name]:
            needed.add(artifact)
    produced_here = set()
    for name in selected:
        produced_here.update(_PRODUCES.get(name, ()))
    reused = sorted(needed - produced_here)
    if reused and previous is not None:
        recorded = previous.get("outputs", {})
        for artifact in reused:
            path = out / artifact
            if path.is_file() and artifact in recorded:
                if sha256_file(path) != recorded[artifact]:
                    raise DataError(
                        f"cached artifact {artifact} changed since the last run; "
                        "re-run its producing stage"
                    )

    inputs = {}
    if input_spec.mode == "file" and lo == 0:
        if not Path(input_spec.path).is_file():
            raise MissingFile(f"no such file: {input_spec.path}")
        inputs[str(input_spec.path)] = sha256_file(input_spec.path)

    (out / "config_echo.yaml").write_text(cfg.echo(), encoding="utf-8")

    stage_entries = []
    prev_stage_outputs = {}
    if previous is not None:
        for entry in previous.get("stages", []):
            prev_stage_outputs[entry["name"]] = entry.get("outputs", [])
            if entry["name"] not in selected:
                stage_entries.append({**entry, "cached": True})

    outputs = {}
    for entry in stage_entries:
        for name in entry["outputs"]:
            if (out / name).is_file():
                outputs[name] = sha256_file(out / name)

    def finish_manifest(error=None):
        order = {s: k for k, s in enumerate(STAGES)}
        stage_entries.sort(key=lambda e: order[e["name"]])
        if (out / "config_echo.yaml").is_file():
            outputs["config_echo.yaml"] = sha256_file(out / "config_echo.yaml")
        manifest = {
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "inputs": inputs,
            "stages": stage_entries,
            "outputs": dict(sorted(outputs.items())),
        }
        if error is not None:
            manifest["error"] = error
        _write_json(manifest_path, manifest)
        return manifest

    for name in selected:
        # drop this stage's previous outputs so no orphans survive a re-run
        for stale in prev_stage_outputs.get(name, []):
            (out / stale).unlink(missing_ok=True)
        started = time.perf_counter()
        try:
            written = _STAGE_FNS[name](cfg, out, input_spec)
        except SymidError as exc:
            # keep partial outputs on disk, record how far the run got, and
            # surface the failing stage to the caller
            exc.stage = name
            finish_manifest(error={"stage": name, "message": str(exc)})
            raise
        seconds = time.perf_counter() - started
        stage_entries.append(
            {"name": name, "seconds": seconds, "outputs": written, "cached": False}
        )
        for fname in written:
            outputs[fname] = sha256_file(out / fname)

    return finish_manifest()


_PRODUCES = {
    "acquire": ("series.csv", "rossler.csv"),
    "embed": ("trajectory.csv", "embedding.json"),
    "fragments": ("markers.csv", "markers_overlay.csv", "fragments.json"),
    "normalize": ("descriptors.csv", "transforms.json"),
    "distances": ("matrix.csv",),
    "select": ("ga_log.csv", "winner.json"),
    "identify": ("model.json",),
    "simulate": ("simulated.csv",),
    "compare": ("original_vs_simulated.csv", "comparison.json"),
}

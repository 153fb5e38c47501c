"""Reduced discrete model: fit, simulate, export, and compare.

The model form is
    x(t+1) = A x(t) + Psi g(x(t), t)
with A an n x n matrix, g a vector of scalar basis functions of the state
and the 0-based time index, and Psi the n x B coefficient matrix. A and Psi
are fit jointly by (optionally ridge-regularized) least squares; an
observation matrix C mapping state to a measured series can be fit
separately when such a series is supplied.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .embedding import Trajectory
from .errors import (
    DimensionMismatch,
    DivergedTrajectory,
    PreconditionViolation,
    RankDeficient,
    SchemaViolation,
)
from .signal_io import DIVERGENCE_BOUND


@dataclass
class BasisFunction:
    """Scalar nonlinearity g(x, t); ``fn`` maps (state vector, time index) to a float."""

    id: str
    fn: callable


def _monomial(j, power):
    return lambda x, t: float(x[j]) ** power


def _product(j, k):
    return lambda x, t: float(x[j]) * float(x[k])


def _exp_sin(a, b):
    # t^a and t^b are 0 at t=0 for positive exponents, so g(x, 0) = 0
    return lambda x, t: np.exp(float(t) ** a) * np.sin(float(t) ** b)


_EXP_SIN_RE = re.compile(r"^exp_sin\(\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)$")
_MONO_RE = re.compile(r"^x(\d+)(?:\^([23]))?$")
_PROD_RE = re.compile(r"^x(\d+)\*x(\d+)$")


def basis_from_id(bid: str, dim: int) -> BasisFunction:
    """Build one basis function from its id string.

    Supported ids: ``x<i>``, ``x<i>^2``, ``x<i>^3`` (1-based coordinate
    powers), ``x<i>*x<j>`` (pair products), and ``exp_sin(a,b)`` for
    exp(t^a)*sin(t^b).
    """
    m = _MONO_RE.match(bid)
    if m:
        j, power = int(m.group(1)) - 1, int(m.group(2) or 1)
        if not 0 <= j < dim:
            raise SchemaViolation("model.basis", f"coordinate out of range in {bid!r}")
        return BasisFunction(bid, _monomial(j, power))
    m = _PROD_RE.match(bid)
    if m:
        j, k = int(m.group(1)) - 1, int(m.group(2)) - 1
        if not (0 <= j < dim and 0 <= k < dim):
            raise SchemaViolation("model.basis", f"coordinate out of range in {bid!r}")
        return BasisFunction(bid, _product(j, k))
    m = _EXP_SIN_RE.match(bid)
    if m:
        try:
            a, b = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise SchemaViolation("model.basis", f"bad exponents in {bid!r}") from None
        return BasisFunction(f"exp_sin({a!r},{b!r})", _exp_sin(a, b))
    raise SchemaViolation("model.basis", f"unknown basis id {bid!r}")


def build_basis(ids, dim: int) -> list[BasisFunction]:
    """Expand a list of basis ids (including poly1/poly2/poly3 groups)."""
    out = []
    for bid in ids:
        if bid == "poly1":
            out += [basis_from_id(f"x{j + 1}", dim) for j in range(dim)]
        elif bid == "poly2":
            out += [basis_from_id(f"x{j + 1}^2", dim) for j in range(dim)]
            out += [basis_from_id(f"x{j + 1}*x{k + 1}", dim)
                    for j, k in itertools.combinations(range(dim), 2)]
        elif bid == "poly3":
            out += [basis_from_id(f"x{j + 1}^3", dim) for j in range(dim)]
        else:
            out.append(basis_from_id(bid, dim))
    return out


def evaluate_basis(basis, points: np.ndarray, t0: int = 0) -> np.ndarray:
    """(T, B) matrix of basis values along a point sequence starting at time t0."""
    out = np.empty((len(points), len(basis)))
    for row, x in enumerate(points):
        t = t0 + row
        for col, b in enumerate(basis):
            out[row, col] = b.fn(x, t)
    if not np.all(np.isfinite(out)):
        raise PreconditionViolation("basis functions produced non-finite values")
    return out


@dataclass
class FitReport:
    rms_residuals: np.ndarray  # per-coordinate one-step residual RMS
    condition: float           # singular-value ratio of the regressor matrix


@dataclass
class IdentifiedModel:
    a: np.ndarray                      # n x n state transition
    psi: np.ndarray                    # n x B nonlinearity coefficients
    basis_ids: list[str]
    c: np.ndarray | None = None        # p x n observation matrix, optional
    fit_report: FitReport | None = None

    @property
    def dim(self):
        return self.a.shape[0]

    def basis(self) -> list[BasisFunction]:
        return [basis_from_id(bid, self.dim) for bid in self.basis_ids]


def fit_model(traj: Trajectory, basis: list[BasisFunction], ridge: float = 0.0,
              observable: np.ndarray | None = None) -> IdentifiedModel:
    """Least-squares fit of A and Psi to one-step transitions of ``traj``.

    Minimizes sum_t ||x(t+1) - A x(t) - Psi g(x(t), t)||^2, plus
    ridge * ||params||^2 when ridge > 0. With ridge = 0 the normal system is
    solved by SVD and a singular regressor matrix raises RankDeficient with
    a condition estimate. When ``observable`` (length T series or T x p
    matrix) is given, C is regressed separately on the state.
    """
    if ridge < 0:
        raise PreconditionViolation("ridge must be >= 0")
    n, n_basis = traj.dim, len(basis)
    if len(traj) < n + n_basis + 1:
        raise PreconditionViolation(
            f"need at least {n + n_basis + 1} points to fit {n} states and {n_basis} basis terms"
        )
    x_now = traj.points[:-1]
    x_next = traj.points[1:]
    if n_basis:
        g = evaluate_basis(basis, x_now, t0=0)
        regressors = np.hstack([x_now, g])
    else:
        regressors = x_now

    n_params = regressors.shape[1]
    u, s, vt = np.linalg.svd(regressors, full_matrices=False)
    cutoff = s[0] * max(regressors.shape) * np.finfo(float).eps if s[0] > 0 else 0.0
    rank = int(np.sum(s > cutoff))
    condition = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    if ridge == 0.0:
        if rank < n_params:
            raise RankDeficient(
                f"regressor matrix has rank {rank} < {n_params}", condition=condition
            )
        theta = vt.T @ ((u.T @ x_next) / s[:, None])
    else:
        # Tikhonov solution via the same SVD: filter factors s/(s^2 + ridge)
        theta = vt.T @ ((u.T @ x_next) * (s / (s * s + ridge))[:, None])

    a = theta[:n].T
    psi = theta[n:].T if n_basis else np.zeros((n, 0))
    residuals = x_next - regressors @ theta
    report = FitReport(np.sqrt(np.mean(residuals**2, axis=0)), condition)

    c = None
    if observable is not None:
        y = np.asarray(observable, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != len(traj):
            raise DimensionMismatch("observable length must match the trajectory")
        c = np.linalg.lstsq(traj.points, y, rcond=None)[0].T

    return IdentifiedModel(a, psi, [b.id for b in basis], c=c, fit_report=report)


def simulate(model: IdentifiedModel, x0, steps: int,
             bound: float = DIVERGENCE_BOUND) -> Trajectory:
    """Iterate the fitted map for ``steps`` steps from x0 (steps+1 points out).

    Raises:
        DivergedTrajectory: a state exceeded the magnitude bound.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,):
        raise DimensionMismatch(f"x0 must have {model.dim} coordinates")
    if steps < 1:
        raise PreconditionViolation("steps must be >= 1")
    basis = model.basis()
    out = np.empty((steps + 1, model.dim))
    out[0] = x0
    x = x0
    for t in range(steps):
        g = np.array([b.fn(x, t) for b in basis]) if basis else np.zeros(0)
        x = model.a @ x + model.psi @ g
        if not np.all(np.isfinite(x)) or np.any(np.abs(x) > bound):
            raise DivergedTrajectory(f"simulation diverged at step {t + 1}")
        out[t + 1] = x
    return Trajectory(out, model.dim, source="simulate")


def observe(model: IdentifiedModel, traj: Trajectory) -> np.ndarray:
    """Observation series y(t) = C x(t) for a model with a fitted C."""
    if model.c is None:
        raise PreconditionViolation("model has no observation matrix")
    return traj.points @ model.c.T


@dataclass
class ComparisonMetrics:
    free_run_rmse: float
    cloud_distance: float
    one_step_rmse: float | None = None  # only when a model is supplied


def compare(orig: Trajectory, sim: Trajectory,
            model: IdentifiedModel | None = None) -> ComparisonMetrics:
    """Compare source dynamics against a simulated trajectory.

    Reports the free-run RMSE over aligned indices (truncating to the
    shorter trajectory), the symmetrized mean nearest-neighbor distance
    between the two point clouds, and, when ``model`` is given, the
    one-step-ahead RMSE of the fitted map evaluated on ``orig``.
    """
    if orig.dim != sim.dim:
        raise DimensionMismatch(f"trajectory dimensions {orig.dim} != {sim.dim}")
    t_common = min(len(orig), len(sim))
    diff = orig.points[:t_common] - sim.points[:t_common]
    free_run = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))

    tree_o = cKDTree(orig.points)
    tree_s = cKDTree(sim.points)
    d_os = tree_s.query(orig.points)[0].mean()
    d_so = tree_o.query(sim.points)[0].mean()
    cloud = float((d_os + d_so) / 2.0)

    one_step = None
    if model is not None:
        if model.dim != orig.dim:
            raise DimensionMismatch("model dimension does not match the trajectory")
        basis = model.basis()
        x_now = orig.points[:-1]
        pred = x_now @ model.a.T
        if basis:
            pred = pred + evaluate_basis(basis, x_now, t0=0) @ model.psi.T
        err = orig.points[1:] - pred
        one_step = float(np.sqrt(np.mean(np.sum(err * err, axis=1))))

    return ComparisonMetrics(free_run, cloud, one_step)


def save_model(path, model: IdentifiedModel):
    """Write a model as JSON; floats keep shortest round-trip precision."""
    doc = {
        "dim": model.dim,
        "a": model.a.tolist(),
        "psi": model.psi.tolist(),
        "basis": list(model.basis_ids),
        "c": None if model.c is None else model.c.tolist(),
        "fit_report": None
        if model.fit_report is None
        else {
            "rms_residuals": np.asarray(model.fit_report.rms_residuals).tolist(),
            "condition": model.fit_report.condition,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return Path(path)


def load_model(path) -> IdentifiedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    report = None
    if doc.get("fit_report"):
        report = FitReport(
            np.array(doc["fit_report"]["rms_residuals"]),
            doc["fit_report"]["condition"],
        )
    return IdentifiedModel(
        a=np.array(doc["a"], dtype=float),
        psi=np.array(doc["psi"], dtype=float).reshape(doc["dim"], -1),
        basis_ids=list(doc["basis"]),
        c=None if doc.get("c") is None else np.array(doc["c"], dtype=float),
        fit_report=report,
    )

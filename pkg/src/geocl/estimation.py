"""Fitting the distance laws of a reference graph and the intensities they imply.

Two cumulative curves describe the reference graph: ``F1(x)``, the probability
that a random pair is adjacent and at most ``x`` apart, and ``F2(x)``, the
probability that a random pair is at most ``x`` apart. Both are modelled as
scaled logistics ``L / (1 + exp(alpha + beta x))`` with ``L = epsilon`` for
``F1`` and ``L = 1`` for ``F2``. The ratio of their derivatives is the edge
probability at a given distance; summing it over a vertex's partners gives the
vertex's geometric weight, and dividing the observed degree by that weight
corrects for edges lost at the boundary of the sampled region.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .graph import SpatialGraph, degrees, distance_rows, edge_density, edge_lengths

Convention = Literal["ordered", "unordered"]

DEFAULT_GRID_SIZE = 200


class FitError(RuntimeError):
    """Curve fit failed to converge or the data cannot determine a curve."""


@dataclass(frozen=True)
class LogisticCurve:
    """``L / (1 + exp(alpha + beta x))``, increasing for ``beta < 0``."""

    L: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"plateau must be positive, got {self.L}")
        if not self.beta < 0:
            raise ValueError(f"beta must be negative, got {self.beta}")

    def value(self, x):
        z = self.alpha + self.beta * np.asarray(x, dtype=np.float64)
        return self.L * np.exp(-np.logaddexp(0.0, z))

    def log_derivative(self, x):
        z = self.alpha + self.beta * np.asarray(x, dtype=np.float64)
        return math.log(self.L) + math.log(-self.beta) + z - 2.0 * np.logaddexp(0.0, z)

    def derivative(self, x):
        return np.exp(self.log_derivative(x))

    @property
    def midpoint(self) -> float:
        return -self.alpha / self.beta


@dataclass(frozen=True)
class EmpiricalCdf:
    xs: np.ndarray
    ps: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ps = np.asarray(self.ps, dtype=np.float64)
        if xs.shape != ps.shape or xs.ndim != 1:
            raise ValueError("xs and ps must be 1-D arrays of equal length")
        if xs.size > 1 and np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if np.any(np.diff(ps) < 0) or (ps.size and (ps[0] < 0 or ps[-1] > 1)):
            raise ValueError("ps must be non-decreasing within [0, 1]")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ps", ps)

    def __call__(self, x):
        """Right-continuous step evaluation on the grid."""
        idx = np.searchsorted(self.xs, np.asarray(x, dtype=np.float64), side="right") - 1
        return np.where(idx >= 0, self.ps[np.clip(idx, 0, None)], 0.0)


@dataclass(frozen=True)
class DistanceLaw:
    """Fitted ``F1`` and ``F2`` together with the edge density ``epsilon``."""

    epsilon: float
    f1: LogisticCurve
    f2: LogisticCurve

    def ratio(self, x):
        """``F1'(x) / F2'(x)``: edge probability for a pair at distance ``x``."""
        return np.exp(self.f1.log_derivative(x) - self.f2.log_derivative(x))


@dataclass(frozen=True)
class ChungLuCheck:
    ok: bool
    violators: tuple[int, ...]


@dataclass(frozen=True)
class FitQuality:
    mse: float
    mean_percent_error: float


@dataclass(frozen=True)
class ModelFit(DistanceLaw):
    degrees: np.ndarray = field(default=None, repr=False)
    omega: np.ndarray = field(default=None, repr=False)
    rho_hat: np.ndarray = field(default=None, repr=False)
    sum_rho: float = 0.0
    chung_lu: ChungLuCheck = ChungLuCheck(True, ())

    @property
    def law(self) -> DistanceLaw:
        return DistanceLaw(self.epsilon, self.f1, self.f2)

    def with_intensities(self, rho) -> "ModelFit":
        rho = np.asarray(rho, dtype=np.float64)
        return ModelFit(self.epsilon, self.f1, self.f2, self.degrees, self.omega, rho,
                        float(rho.sum()), check_chung_lu_condition(rho))


# -- empirical curves ----------------------------------------------------------

def _distance_grid(g: SpatialGraph, grid_size: int) -> np.ndarray:
    if g.n == 0:
        raise ValueError("graph has no vertices")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    dmax = max(float(rows.max()) for _, rows in distance_rows(g))
    if dmax <= 0:
        raise FitError("all vertices coincide; distance grid is degenerate")
    return np.linspace(0.0, dmax, grid_size)


def _pair_counts_at(g: SpatialGraph, xs: np.ndarray) -> np.ndarray:
    """#{unordered pairs i < j with d_ij <= x} at each grid point."""
    counts = np.zeros(xs.size, dtype=np.int64)
    for start, rows in distance_rows(g):
        k = rows.shape[0]
        mask = np.arange(g.n)[None, :] > (np.arange(k)[:, None] + start)
        d = np.sort(rows[mask])
        counts += np.searchsorted(d, xs, side="right")
    return counts


def _normaliser(n: int, convention: Convention) -> float:
    if convention == "ordered":
        return float(n) * n
    if convention == "unordered":
        return n * (n + 1) / 2.0
    raise ValueError(f"unknown pair convention {convention!r}")


def empirical_F1(g: SpatialGraph, grid_size: int = DEFAULT_GRID_SIZE,
                 convention: Convention = "ordered") -> EmpiricalCdf:
    """Share of vertex pairs that are adjacent and within each grid distance.

    ``ordered`` counts ordered pairs over ``n**2`` (an edge ``i~j`` twice, a loop
    once), so ``F1(0) = loops / n**2``. ``unordered`` counts each edge once over
    ``n(n+1)/2`` and plateaus at exactly the edge density.
    """
    xs = _distance_grid(g, grid_size)
    lengths = edge_lengths(g)
    loops = g.loop_mask
    if convention == "ordered":
        loop_d = np.sort(lengths[loops])
        pair_d = np.sort(lengths[~loops])
        counts = (np.searchsorted(loop_d, xs, side="right")
                  + 2 * np.searchsorted(pair_d, xs, side="right"))
    else:
        counts = np.searchsorted(np.sort(lengths), xs, side="right")
    return EmpiricalCdf(xs, counts / _normaliser(g.n, convention))


def empirical_F2(g: SpatialGraph, grid_size: int = DEFAULT_GRID_SIZE,
                 convention: Convention = "ordered") -> EmpiricalCdf:
    """Share of vertex pairs (diagonal included) within each grid distance.

    ``F2(0)`` is ``1/n`` under ``ordered`` and ``2/(n+1)`` under ``unordered``
    when positions are distinct.
    """
    xs = _distance_grid(g, grid_size)
    below = _pair_counts_at(g, xs)
    mult = 2 if convention == "ordered" else 1
    counts = mult * below + g.n
    return EmpiricalCdf(xs, counts / _normaliser(g.n, convention))


# -- logistic least squares ----------------------------------------------------

def _initial_guess(xs: np.ndarray, ps: np.ndarray, plateau: float) -> tuple[float, float]:
    """(alpha, beta) from the quarter and three-quarter crossings of the data."""
    lo, hi = 0.25 * plateau, 0.75 * plateau
    if ps[0] < lo and ps[-1] > hi:
        x25 = float(np.interp(lo, ps, xs))
        x75 = float(np.interp(hi, ps, xs))
        if x75 > x25:
            beta = -2.0 * math.log(3.0) / (x75 - x25)
            return math.log(3.0) - beta * x25, beta
    # data never spans the quartiles; regress the logit on interior points
    inside = (ps > 0.01 * plateau) & (ps < 0.99 * plateau)
    if inside.sum() >= 2 and np.ptp(xs[inside]) > 0:
        logit = np.log(plateau / ps[inside] - 1.0)
        beta, alpha = np.polyfit(xs[inside], logit, 1)
        if beta < 0:
            return float(alpha), float(beta)
    span = float(xs[-1] - xs[0]) or 1.0
    return 0.0, -4.0 / span


def fit_logistic(cdf: EmpiricalCdf, plateau: float, max_iter: int = 500,
                 tol: float = 1e-10) -> LogisticCurve:
    """Least-squares ``(alpha, beta)`` for a logistic with fixed plateau.

    Damped Gauss-Newton (Levenberg-Marquardt) with an analytic Jacobian, run on
    abscissae rescaled to ``[0, 1]``. Converged once the accepted step has
    infinity norm below ``tol``.
    """
    if not plateau > 0:
        raise ValueError("plateau must be positive")
    xs, ps = cdf.xs, cdf.ps
    if np.unique(ps).size < 3:
        raise FitError("CDF has fewer than 3 distinct values; logistic is undetermined")

    scale = float(np.max(np.abs(xs))) or 1.0
    s = xs / scale
    a0, b0 = _initial_guess(xs, ps, plateau)
    theta = np.array([a0, b0 * scale])

    def residual(th):
        z = th[0] + th[1] * s
        return plateau * np.exp(-np.logaddexp(0.0, z)) - ps

    def jacobian(th):
        z = th[0] + th[1] * s
        # d/dz L/(1+e^z) = -L e^z/(1+e^z)^2
        dz = -plateau * np.exp(z - 2.0 * np.logaddexp(0.0, z))
        return np.column_stack([dz, dz * s])

    r = residual(theta)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        J = jacobian(theta)
        JtJ = J.T @ J
        g = J.T @ r
        diag = np.diag(JtJ).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + step
            r_new = residual(trial)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                theta, r, cost = trial, r_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted or np.max(np.abs(step)) < tol:
            break
    else:
        raise FitError(f"logistic fit did not converge in {max_iter} iterations "
                       f"(residual sum of squares {cost:.3e})")

    alpha, beta = float(theta[0]), float(theta[1] / scale)
    if not beta < 0:
        raise FitError(f"fitted slope is not negative (beta={beta:.3e}); CDF is not increasing")
    return LogisticCurve(plateau, alpha, beta)


def fit_quality(cdf: EmpiricalCdf, curve: LogisticCurve, x_min: float | None = None) -> FitQuality:
    """MSE and mean percent error (in percent) of ``curve`` on the grid, optionally for ``x >= x_min``."""
    mask = np.ones(cdf.xs.size, dtype=bool) if x_min is None else cdf.xs >= x_min
    if not mask.any():
        raise ValueError(f"no grid points at or above x_min={x_min}")
    obs = cdf.ps[mask]
    res = curve.value(cdf.xs[mask]) - obs
    pos = obs > 0
    mpe = 100.0 * float(np.mean(np.abs(res[pos]) / obs[pos])) if pos.any() else 0.0
    return FitQuality(float(np.mean(res ** 2)), mpe)


# -- connection law and intensities -------------------------------------------

def derivative_ratio(fit: DistanceLaw, x):
    return fit.ratio(x)


def ratio_turning_points(fit: DistanceLaw, x_max: float, num: int = 20001) -> np.ndarray:
    """Grid abscissae in ``[0, x_max]`` where the ratio's slope changes sign."""
    xs = np.linspace(0.0, x_max, num)
    logr = fit.f1.log_derivative(xs) - fit.f2.log_derivative(xs)
    slope = np.sign(np.diff(logr))
    slope = slope[slope != 0]
    flips = np.nonzero(np.diff(slope))[0]
    return xs[flips + 1]


def geometric_weights(g: SpatialGraph, fit: DistanceLaw) -> np.ndarray:
    """``omega_i = sum_j F1'(d_ij) / F2'(d_ij)`` over all ``j`` including ``i`` itself."""
    omega = np.empty(g.n, dtype=np.float64)
    for start, rows in distance_rows(g):
        omega[start:start + rows.shape[0]] = fit.ratio(rows).sum(axis=1)
    return omega


def rho_hat(deg, omega, n: int, epsilon: float):
    """``deg * n * epsilon / omega``."""
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(omega <= 0):
        raise ValueError("geometric weights must be positive")
    return np.asarray(deg, dtype=np.float64) * n * epsilon / omega


def estimate_intensities(g: SpatialGraph, fit: DistanceLaw, omega=None) -> np.ndarray:
    if omega is None:
        omega = geometric_weights(g, fit)
    return rho_hat(degrees(g), omega, g.n, fit.epsilon)


def check_chung_lu_condition(rho) -> ChungLuCheck:
    """``(max rho)^2 < sum rho``; violators are every vertex with ``rho_i^2 >= sum rho``."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.size == 0:
        return ChungLuCheck(True, ())
    total = float(rho.sum())
    bad = np.nonzero(rho ** 2 >= total)[0]
    return ChungLuCheck(bad.size == 0, tuple(int(v) for v in bad))


@dataclass(frozen=True)
class FitResult:
    """A :class:`ModelFit` plus the empirical curves it was fitted to."""

    model: ModelFit
    cdf1: EmpiricalCdf
    cdf2: EmpiricalCdf

    def quality(self, x_min: float | None = None) -> tuple[FitQuality, FitQuality]:
        return (fit_quality(self.cdf1, self.model.f1, x_min),
                fit_quality(self.cdf2, self.model.f2, x_min))


def fit_model(g: SpatialGraph, grid_size: int = DEFAULT_GRID_SIZE,
              convention: Convention = "ordered") -> FitResult:
    """Estimate epsilon, both logistic curves, geometric weights and intensities."""
    eps = edge_density(g)
    if eps <= 0:
        raise FitError("reference graph has no edges")
    cdf1 = empirical_F1(g, grid_size, convention)
    cdf2 = empirical_F2(g, grid_size, convention)
    law = DistanceLaw(eps, fit_logistic(cdf1, eps), fit_logistic(cdf2, 1.0))
    omega = geometric_weights(g, law)
    deg = degrees(g)
    rho = rho_hat(deg, omega, g.n, eps)
    model = ModelFit(eps, law.f1, law.f2, deg, omega, rho, float(rho.sum()),
                     check_chung_lu_condition(rho))
    return FitResult(model, cdf1, cdf2)


# -- reports -------------------------------------------------------------------

def fit_report(result: FitResult, x_min: float = 500.0) -> dict:
    m = result.model
    q1, q2 = result.quality()
    t1, t2 = result.quality(x_min)
    return {
        "epsilon": m.epsilon,
        "alpha1": m.f1.alpha, "beta1": m.f1.beta,
        "alpha2": m.f2.alpha, "beta2": m.f2.beta,
        "mse_f1": q1.mse, "mse_f2": q2.mse,
        "mpe_f1": q1.mean_percent_error, "mpe_f2": q2.mean_percent_error,
        "tail_x_min": x_min,
        "mse_f1_tail": t1.mse, "mse_f2_tail": t2.mse,
        "mpe_f1_tail": t1.mean_percent_error, "mpe_f2_tail": t2.mean_percent_error,
        "sum_rho": m.sum_rho,
        "chung_lu_ok": m.chung_lu.ok,
        "violators": list(m.chung_lu.violators),
    }


def write_fit_report(result: FitResult, path, x_min: float = 500.0) -> None:
    with open(path, "w") as fh:
        json.dump(fit_report(result, x_min), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_fit(report_path, g: SpatialGraph) -> ModelFit:
    """Rebuild a :class:`ModelFit` from a fit report and its reference graph."""
    with open(report_path) as fh:
        rep = json.load(fh)
    eps = float(rep["epsilon"])
    law = DistanceLaw(eps, LogisticCurve(eps, rep["alpha1"], rep["beta1"]),
                      LogisticCurve(1.0, rep["alpha2"], rep["beta2"]))
    omega = geometric_weights(g, law)
    deg = degrees(g)
    rho = rho_hat(deg, omega, g.n, eps)
    return ModelFit(eps, law.f1, law.f2, deg, omega, rho, float(rho.sum()),
                    check_chung_lu_condition(rho))


def write_intensities(g: SpatialGraph, fit: ModelFit, path) -> None:
    centroid = g.positions.mean(axis=0)
    dist = np.linalg.norm(g.positions - centroid, axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "degree", "omega", "rho_hat", "dist_to_centroid"])
        for v in range(g.n):
            w.writerow([v, int(fit.degrees[v]), repr(float(fit.omega[v])),
                        repr(float(fit.rho_hat[v])), repr(float(dist[v]))])

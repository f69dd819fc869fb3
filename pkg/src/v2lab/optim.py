"""Levenberg-Marquardt least squares shared by every fit in the package.

Models follow the ``curve_fit`` convention: ``model(x, *values)`` returns the
predicted ``y`` for the parameter values in :class:`ParamSpec` order.

>>> specs = [ParamSpec("a", 1.0), ParamSpec("b", 0.0)]
>>> res = fit_least_squares(lambda x, a, b: a * x + b, specs, [0, 1, 2], [1, 3, 5])
>>> round(res.value("a"), 6), round(res.value("b"), 6)
(2.0, 1.0)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FitError",
    "ParamSpec",
    "FitResult",
    "fit_least_squares",
    "numeric_jacobian",
]

LAMBDA_START = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16
MAX_ITER = 200
COST_RTOL = 1e-10
GRAD_TOL = 1e-10


class FitError(ValueError):
    """Raised when a model cannot be evaluated during a fit."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    initial: float
    lower: float = -math.inf
    upper: float = math.inf
    frozen: bool = False

    def __post_init__(self):
        if not self.lower <= self.initial <= self.upper:
            raise ValueError(
                f"parameter {self.name!r}: initial {self.initial} outside "
                f"[{self.lower}, {self.upper}]"
            )


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``params`` maps each name to ``(value, sigma)``. ``extras`` holds derived
    quantities that a particular analysis attaches (band limits, ratios), and
    ``warnings`` short machine-readable flags.
    """

    params: dict[str, tuple[float, float]]
    covariance: np.ndarray
    chi2_reduced: float
    n_points: int
    n_iterations: int
    converged: bool
    model: str = ""
    extras: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def value(self, name: str) -> float:
        return self.params[name][0]

    def sigma(self, name: str) -> float:
        return self.params[name][1]

    @property
    def names(self) -> list[str]:
        return list(self.params)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.params.values()])

    def to_dict(self) -> dict:
        doc = {
            "model": self.model,
            "params": {
                k: {"value": _json_float(v), "sigma": _json_float(s)}
                for k, (v, s) in self.params.items()
            },
            "chi2_reduced": _json_float(self.chi2_reduced),
            "converged": bool(self.converged),
            "covariance": [[_json_float(c) for c in row] for row in np.asarray(self.covariance)],
            "n_points": int(self.n_points),
            "n_iterations": int(self.n_iterations),
        }
        if self.extras:
            doc["extras"] = _jsonable(self.extras)
        if self.warnings:
            doc["warnings"] = list(self.warnings)
        return doc

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        params = {
            k: (_float_or_inf(p["value"]), _float_or_inf(p["sigma"]))
            for k, p in doc["params"].items()
        }
        rows = [[_float_or_inf(c) for c in row] for row in doc.get("covariance", [])]
        # derived parameters (appended after the fit) have no covariance rows
        cov = np.array(rows, dtype=float).reshape(len(rows), len(rows))
        return cls(
            params=params,
            covariance=cov,
            chi2_reduced=_float_or_inf(doc["chi2_reduced"]),
            n_points=int(doc.get("n_points", 0)),
            n_iterations=int(doc.get("n_iterations", 0)),
            converged=bool(doc["converged"]),
            model=doc.get("model", ""),
            extras=doc.get("extras", {}),
            warnings=list(doc.get("warnings", [])),
        )


def _json_float(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def _float_or_inf(v):
    return float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_float(obj)
    return obj


def numeric_jacobian(
    model: Callable[[np.ndarray], np.ndarray],
    params: Sequence[float],
    rel_step: float = 1e-6,
    names: Sequence[str] | None = None,
    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
) -> np.ndarray:
    """Central-difference Jacobian of ``model(params)`` with respect to ``params``.

    The step for parameter ``p`` is ``max(rel_step * |p|, rel_step)``.
    With ``bounds=(lower, upper)`` a parameter closer than one step to a
    bound is differenced one-sidedly (second order) so the model is never
    evaluated outside the box. Returns an array of shape
    ``(n_outputs, n_params)``.
    """
    if rel_step <= 0:
        raise ValueError("rel_step must be positive")
    p = np.asarray(params, dtype=float)
    lower = np.full(p.size, -np.inf) if bounds is None else np.asarray(bounds[0], dtype=float)
    upper = np.full(p.size, np.inf) if bounds is None else np.asarray(bounds[1], dtype=float)
    f0 = np.atleast_1d(np.asarray(model(p), dtype=float))

    def probe(k, offset):
        q = p.copy()
        q[k] += offset
        out = np.atleast_1d(np.asarray(model(q), dtype=float))
        if not np.all(np.isfinite(out)):
            label = names[k] if names is not None else f"#{k}"
            raise FitError(f"non-finite model output probing parameter {label} at {p.tolist()}")
        return out

    jac = np.empty((f0.size, p.size))
    for k in range(p.size):
        h = max(rel_step * abs(p[k]), rel_step)
        if p[k] - h < lower[k] and p[k] + 2 * h <= upper[k]:
            jac[:, k] = (-3.0 * f0 + 4.0 * probe(k, h) - probe(k, 2 * h)) / (2.0 * h)
        elif p[k] + h > upper[k] and p[k] - 2 * h >= lower[k]:
            jac[:, k] = (3.0 * f0 - 4.0 * probe(k, -h) + probe(k, -2 * h)) / (2.0 * h)
        else:
            jac[:, k] = (probe(k, h) - probe(k, -h)) / (2.0 * h)
    return jac


def fit_least_squares(
    model: Callable[..., np.ndarray],
    specs: Sequence[ParamSpec],
    x,
    y,
    y_sigma=None,
    *,
    name: str = "",
    rel_step: float = 1e-7,
    max_iter: int = MAX_ITER,
) -> FitResult:
    """Weighted least squares by Levenberg-Marquardt with box clamping.

    Without ``y_sigma`` the fit is unweighted and the covariance is scaled by
    the residual variance. With ``y_sigma`` the covariance is absolute.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    specs = list(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate parameter names")
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have the same length")
    if y_sigma is not None:
        w = np.asarray(y_sigma, dtype=float)
        if w.shape != y.shape or np.any(~(w > 0)):
            raise ValueError("y_sigma must be strictly positive and match y")
    else:
        w = np.ones_like(y)

    free = np.array([not s.frozen for s in specs], dtype=bool)
    n_free = int(free.sum())
    if y.size < n_free:
        raise ValueError(f"{y.size} points cannot constrain {n_free} free parameters")
    lower = np.array([s.lower for s in specs], dtype=float)[free]
    upper = np.array([s.upper for s in specs], dtype=float)[free]
    full = np.array([s.initial for s in specs], dtype=float)

    def expand(p_free):
        p = full.copy()
        p[free] = p_free
        return p

    def residuals(p_free):
        pred = np.asarray(model(x, *expand(p_free)), dtype=float)
        if pred.shape != y.shape:
            pred = np.broadcast_to(pred, y.shape)
        r = (y - pred) / w
        if not np.all(np.isfinite(r)):
            raise FitError(f"non-finite model output at parameters {dict(zip(names, expand(p_free).tolist()))}")
        return r

    p = full[free].copy()
    r = residuals(p)
    cost = float(r @ r)
    dof = y.size - n_free

    if n_free == 0:
        return _result(names, full, free, np.zeros((0, 0)), cost, dof, y.size, 0, True,
                       y_sigma is not None, name)

    def jac_of(p_free):
        return numeric_jacobian(residuals, p_free, rel_step, [n for n, f in zip(names, free) if f],
                                bounds=(lower, upper))

    lam = LAMBDA_START
    J = jac_of(p)
    converged = False
    it = 0
    while it < max_iter:
        g = J.T @ r
        # parameters pinned at a bound with the descent direction pointing outward
        active = ((p <= lower) & (g > 0)) | ((p >= upper) & (g < 0))
        inner = ~active
        if not inner.any() or np.max(np.abs(g[inner])) < GRAD_TOL or cost == 0.0:
            converged = True
            break
        A = J[:, inner].T @ J[:, inner]
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while lam < LAMBDA_MAX:
            step = np.zeros_like(p)
            try:
                step[inner] = np.linalg.solve(A + lam * np.diag(diag), -g[inner])
            except np.linalg.LinAlgError:
                lam *= LAMBDA_UP
                continue
            trial = np.clip(p + step, lower, upper)
            try:
                r_trial = residuals(trial)
            except FitError:
                lam *= LAMBDA_UP
                continue
            cost_trial = float(r_trial @ r_trial)
            if cost_trial < cost:
                accepted = True
                break
            lam *= LAMBDA_UP
        it += 1
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
        rel_drop = (cost - cost_trial) / cost
        p, r, cost = trial, r_trial, cost_trial
        lam = max(lam / LAMBDA_DOWN, 1e-12)
        J = jac_of(p)
        if rel_drop < COST_RTOL:
            converged = True
            break

    return _result(names, expand(p), free, J, cost, dof, y.size, it, converged,
                   y_sigma is not None, name)


def _result(names, values, free, J, cost, dof, n_points, n_iter, converged, weighted, name):
    n = len(names)
    cov = np.zeros((n, n))
    chi2_red = cost / dof if dof > 0 else 0.0
    warnings = []
    if J.size:
        A = J.T @ J
        try:
            if np.linalg.cond(A) > 1e15:
                raise np.linalg.LinAlgError("ill-conditioned")
            cov_free = np.linalg.inv(A)
            if not weighted:
                cov_free = cov_free * chi2_red
            cov_free = 0.5 * (cov_free + cov_free.T)
        except np.linalg.LinAlgError:
            cov_free = np.full(A.shape, np.inf)
            converged = False
            warnings.append("singular_hessian")
        idx = np.flatnonzero(free)
        cov[np.ix_(idx, idx)] = cov_free
    diag = np.diag(cov)
    sig = np.where(np.isfinite(diag), np.sqrt(np.clip(diag, 0.0, None)), np.inf)
    params = {k: (float(v), float(s)) for k, v, s in zip(names, values, sig)}
    return FitResult(params, cov, float(chi2_red), n_points, n_iter, converged,
                     model=name, warnings=warnings)

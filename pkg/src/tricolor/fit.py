"""Pump-power sweeps of the phase-sum noise and fits of the free model parameters.

The free parameters are the pump and twin OPO detunings and the effective
excess pump phase noise.  Fits minimise the error-weighted squared residuals
of ``beta0`` and ``Var(q+)`` jointly with a bounded Nelder-Mead simplex.
Starts are the user's initial point plus the best cells of a coarse detuning
grid (with the excess noise profiled out), and each run is restarted once
from its best vertex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InsufficientDataError, ModelError, ParameterError
from .opo import OpoParams, excess_noise_decomposition, spectral_covariance
from .quadratures import P0, Q0, Q_PLUS, criteria_report

ANALYSIS_FREQ = 27e6
FREE_NAMES = ("delta0", "delta", "s_q0")
DEFAULT_BOUNDS = ((-1.0, 1.0), (-1.0, 1.0), (0.0, 60.0))
_FIELD = {"delta0": "delta0", "delta": "delta", "s_q0": "excess_pump_phase_noise"}
_PENALTY = 1e12


@dataclass
class SigmaScanData:
    """Phase-sum noise versus pump power; ``provenance`` is free text."""

    sigma: np.ndarray
    var_q_plus: np.ndarray
    beta0: np.ndarray
    var_q_plus_corr: np.ndarray
    err_q_plus: Optional[np.ndarray] = None
    err_beta0: Optional[np.ndarray] = None
    provenance: str = "measured"
    extra: dict = field(default_factory=dict)

    COLUMNS = ("sigma", "var_q_plus", "beta0", "var_q_plus_corr", "err_q_plus", "err_beta0")

    def __post_init__(self):
        for name in ("sigma", "var_q_plus", "beta0", "var_q_plus_corr"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.sigma)
        for name in ("err_q_plus", "err_beta0"):
            v = getattr(self, name)
            setattr(self, name, np.zeros(n) if v is None else np.asarray(v, dtype=float))
        for name in self.COLUMNS[1:]:
            if len(getattr(self, name)) != n:
                raise ParameterError(f"column {name} has {len(getattr(self, name))} entries, expected {n}")
        if np.any(self.sigma <= 1):
            raise ParameterError("sigma values must be > 1 (above threshold)")

    def __len__(self):
        return len(self.sigma)


def predict_sigma_scan(params: OpoParams, sigma_grid: Sequence[float],
                       omega: float = ANALYSIS_FREQ) -> SigmaScanData:
    """Model ``Var(q+)``, ``beta0`` and the corrected variance along ``sigma_grid``.

    Extra columns (``var_p_minus``, ``c_p0_qplus``, ``c_q0_qplus`` and the
    normalised ``r_q0_qplus``) are kept in ``extra``.
    """
    rows = []
    for s in sigma_grid:
        cov = spectral_covariance(params.replace(sigma=float(s)), omega)
        rep = criteria_report(cov)
        c_q0 = cov.covariance(Q0, Q_PLUS)
        rows.append((s, rep.var_q_plus, rep.beta0, rep.var_q_plus_corrected, rep.var_p_minus,
                     cov.covariance(P0, Q_PLUS), c_q0,
                     c_q0 / np.sqrt(cov.variance(Q0) * rep.var_q_plus)))
    a = np.array(rows, dtype=float).reshape(-1, 8)
    extra = {"var_p_minus": a[:, 4], "c_p0_qplus": a[:, 5], "c_q0_qplus": a[:, 6], "r_q0_qplus": a[:, 7]}
    # corrected column is recomputed so that it equals var_q_plus - beta0 bit for bit
    return SigmaScanData(a[:, 0], a[:, 1], a[:, 2], a[:, 1] - a[:, 2], provenance="model", extra=extra)


def synthetic_scan(true_params: OpoParams, sigma_grid: Sequence[float], rel_noise: float = 0.02,
                   seed: int = 0, omega: float = ANALYSIS_FREQ) -> SigmaScanData:
    """Model scan with multiplicative Gaussian noise of relative size ``rel_noise``."""
    clean = predict_sigma_scan(true_params, sigma_grid, omega)
    rng = np.random.default_rng(seed)
    q = clean.var_q_plus * (1 + rel_noise * rng.standard_normal(len(clean)))
    b = clean.beta0 * (1 + rel_noise * rng.standard_normal(len(clean)))
    return SigmaScanData(clean.sigma, q, b, q - b, rel_noise * clean.var_q_plus, rel_noise * clean.beta0,
                         provenance=f"synthetic(seed={seed}, delta0={true_params.delta0}, "
                                    f"delta={true_params.delta}, s_q0={true_params.excess_pump_phase_noise})")


@dataclass
class FitResult:
    delta0: float
    delta: float
    s_q0: float
    residual: float
    iterations: int
    converged: bool
    point_residuals: np.ndarray
    history: list

    def as_text(self) -> str:
        lines = [f"delta0={self.delta0:.9g}", f"delta={self.delta:.9g}", f"s_q0={self.s_q0:.9g}",
                 f"residual={self.residual:.9g}", f"iterations={self.iterations}",
                 f"converged={'true' if self.converged else 'false'}"]
        lines += [f"point_residual_{i}={v:.9g}" for i, v in enumerate(self.point_residuals)]
        return "\n".join(lines) + "\n"


def _profiled_scores(data: SigmaScanData, params: OpoParams, s_grid: np.ndarray, omega: float) -> np.ndarray:
    """Objective at every excess-noise value in ``s_grid`` (other params fixed)."""
    wq, wb = _weights(data.err_q_plus), _weights(data.err_beta0)
    total = np.zeros(len(s_grid))
    for k, sig in enumerate(data.sigma):
        base, unit = excess_noise_decomposition(params.replace(sigma=float(sig)), omega)
        v_q = Q_PLUS @ base @ Q_PLUS + s_grid * (Q_PLUS @ unit @ Q_PLUS)
        v_p = P0 @ base @ P0 + s_grid * (P0 @ unit @ P0)
        c = P0 @ base @ Q_PLUS + s_grid * (P0 @ unit @ Q_PLUS)
        total += ((v_q - data.var_q_plus[k]) * wq[k]) ** 2 + ((c * c / v_p - data.beta0[k]) * wb[k]) ** 2
    return total


def _prescan(data, fixed, free, lo, hi, omega, n_starts, step=0.1, s_step=0.25) -> list:
    """Best ``n_starts`` points of a grid over the free detunings, S profiled out."""
    det_free = [n for n in free if n != "s_q0"]
    axes = {}
    for n in det_free:
        i = free.index(n)
        axes[n] = np.linspace(lo[i], hi[i], max(2, int(round((hi[i] - lo[i]) / step)) + 1))
    if "s_q0" in free:
        i = free.index("s_q0")
        s_grid = np.linspace(lo[i], hi[i], max(2, int(round((hi[i] - lo[i]) / s_step)) + 1))
    else:
        s_grid = np.array([fixed.excess_pump_phase_noise])
    points = []
    mesh = np.meshgrid(*[axes[n] for n in det_free], indexing="ij") if det_free else []
    flat = [m.ravel() for m in mesh] if det_free else [np.zeros(1)]
    for j in range(len(flat[0])):
        changes = {n: float(flat[k][j]) for k, n in enumerate(det_free)}
        try:
            scores = _profiled_scores(data, fixed.replace(**changes), s_grid, omega)
        except ModelError:
            continue
        scores = np.where(np.isfinite(scores), scores, np.inf)
        b = int(np.argmin(scores))
        values = dict(changes, s_q0=float(s_grid[b]))
        points.append((float(scores[b]), [values[n] for n in free]))
    points.sort(key=lambda t: t[0])
    return [np.array(p) for _, p in points[:n_starts]]


def _weights(err: np.ndarray) -> np.ndarray:
    return np.where(err > 0, 1.0 / np.where(err > 0, err, 1.0), 1.0)


def scan_residuals(data: SigmaScanData, params: OpoParams, omega: float = ANALYSIS_FREQ) -> np.ndarray:
    """Weighted residuals, ``Var(q+)`` entries first, then ``beta0``."""
    model = predict_sigma_scan(params, data.sigma, omega)
    rq = (model.var_q_plus - data.var_q_plus) * _weights(data.err_q_plus)
    rb = (model.beta0 - data.beta0) * _weights(data.err_beta0)
    return np.concatenate([rq, rb])


def fit_parameters(data: SigmaScanData, fixed: OpoParams, init=(0.0, 0.0, 10.0),
                   bounds=DEFAULT_BOUNDS, free: Sequence[str] = FREE_NAMES,
                   max_iter: int = 2000, omega: float = ANALYSIS_FREQ,
                   n_starts: int = 2) -> FitResult:
    """Fit the free parameters (subset of ``delta0``, ``delta``, ``s_q0``).

    ``init`` and ``bounds`` are given for all three names in ``FREE_NAMES``
    order; entries for names not in ``free`` are ignored and the values in
    ``fixed`` are kept.  Besides ``init``, the ``n_starts`` best points of a
    coarse grid over the bounds seed further simplex runs; the overall best
    is returned, so the result is deterministic for fixed inputs.  ``max_iter``
    caps the simplex iterations summed over all runs.  The observables are unchanged when both detunings
    flip sign, so the result is reported on the branch with ``delta >= 0``.
    """
    if len(data) < 4:
        raise InsufficientDataError(f"need >= 4 data points, got {len(data)}")
    if np.ptp(data.sigma) == 0:
        raise ParameterError("degenerate data: all sigma values are equal")
    free = tuple(free)
    for name in free:
        if name not in FREE_NAMES:
            raise ParameterError(f"unknown free parameter {name!r}")
    sel = [FREE_NAMES.index(n) for n in free]
    lo = np.array([bounds[i][0] for i in sel])
    hi = np.array([bounds[i][1] for i in sel])
    x0 = np.array([init[i] for i in sel], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ParameterError(f"init {tuple(x0)} outside bounds")

    def params_at(x):
        return fixed.replace(**{_FIELD[n]: float(v) for n, v in zip(free, x)})

    history = []
    best = [np.inf]

    def objective(x):
        try:
            res = scan_residuals(data, params_at(np.clip(x, lo, hi)), omega)
            value = float(res @ res)
        except ModelError:
            value = _PENALTY
        best[0] = min(best[0], value)
        history.append(best[0])
        return value

    # coarse pre-scan picks extra simplex starts: the objective has narrow,
    # separated minima that a single local search from ``init`` can miss
    starts = [x0] + _prescan(data, fixed, free, lo, hi, omega, n_starts)

    total_iter = 0
    best_x, best_f, converged = x0, np.inf, False
    for start in starts:
        x, ok = start, False
        for _ in range(2):  # simplex run plus one restart from its best vertex
            budget = max_iter - total_iter
            if budget <= 0:
                ok = False
                break
            out = minimize(objective, x, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                           options={"maxiter": budget, "xatol": 1e-6, "fatol": 1e-10,
                                    "adaptive": True})
            total_iter += int(out.nit)
            x, ok = np.clip(out.x, lo, hi), bool(out.success)
        f = objective(x)
        if f < best_f:
            best_x, best_f, converged = x, f, ok
    x = best_x

    values = dict(zip(free, x))
    d0 = values.get("delta0", fixed.delta0)
    d = values.get("delta", fixed.delta)
    if {"delta0", "delta"} <= set(free) and (d < 0 or (d == 0 and d0 < 0)):
        d0, d = -d0, -d
    s = values.get("s_q0", fixed.excess_pump_phase_noise)
    final = fixed.replace(delta0=d0, delta=d, excess_pump_phase_noise=s)
    try:
        res = scan_residuals(data, final, omega)
    except ModelError:
        res = np.full(2 * len(data), np.nan)
    n = len(data)
    point = res[:n] ** 2 + res[n:] ** 2
    return FitResult(d0, d, s, float(np.sum(point)), total_iter, converged, point, history)

"""Quadrature conventions, spectral covariances and the correlation criteria.

Each field is written as ``a_j = exp(i phi_j) (p_j + i q_j)`` with ``phi_j``
chosen so that the mean of ``q_j`` vanishes: ``p_j`` is the amplitude
quadrature and ``q_j`` the phase quadrature.  Variances are in shot-noise
units (vacuum = 1) and the covariance basis is always ordered
``(p0, q0, p1, q1, p2, q2)`` for pump, signal and idler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DegeneratePumpError, InsufficientDataError, UnphysicalCovarianceError

MODE_LABELS = ("pump", "signal", "idler")
BASIS = ("p0", "q0", "p1", "q1", "p2", "q2")

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9

_SQRT1_2 = 1.0 / np.sqrt(2.0)


def selector(**coefficients: float) -> np.ndarray:
    """Weight vector in the ``BASIS`` ordering, e.g. ``selector(q1=1, q2=1)``."""
    w = np.zeros(len(BASIS))
    for name, value in coefficients.items():
        if name not in BASIS:
            raise ValueError(f"unknown quadrature {name!r}; expected one of {BASIS}")
        w[BASIS.index(name)] = value
    return w


P0 = selector(p0=1.0)
Q0 = selector(q0=1.0)
Q_PLUS = selector(q1=_SQRT1_2, q2=_SQRT1_2)
Q_MINUS = selector(q1=_SQRT1_2, q2=-_SQRT1_2)
P_PLUS = selector(p1=_SQRT1_2, p2=_SQRT1_2)
P_MINUS = selector(p1=_SQRT1_2, p2=-_SQRT1_2)


@dataclass(frozen=True)
class QuadratureConvention:
    """Labels and carrier phases fixing the quadrature basis."""

    mode_labels: tuple = MODE_LABELS
    phase_refs: tuple = (0.0, 0.0, 0.0)
    vacuum_variance: float = 1.0

    def index(self, mode: int, quadrature: str) -> int:
        """Position of quadrature ``'p'`` or ``'q'`` of ``mode`` in the basis."""
        if quadrature not in ("p", "q"):
            raise ValueError("quadrature must be 'p' or 'q'")
        if not 0 <= mode < len(self.mode_labels):
            raise ValueError(f"mode index {mode} out of range")
        return 2 * mode + (quadrature == "q")


@dataclass(frozen=True)
class SpectralCovariance:
    """Symmetric 6x6 quadrature noise matrix at one analysis frequency (Hz)."""

    frequency: float
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (6, 6):
            raise UnphysicalCovarianceError(f"covariance must be 6x6, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise UnphysicalCovarianceError("covariance has non-finite entries")
        asym = np.max(np.abs(m - m.T))
        if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(m))):
            raise UnphysicalCovarianceError(f"covariance not symmetric (max asymmetry {asym:.3g})")
        m = 0.5 * (m + m.T)
        if np.any(np.diag(m) < 0):
            raise UnphysicalCovarianceError("negative variance on the diagonal")
        lam = np.linalg.eigvalsh(m)
        if lam[0] < -PSD_TOL * max(1.0, lam[-1]):
            raise UnphysicalCovarianceError(f"covariance not positive semidefinite (min eigenvalue {lam[0]:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, frequency: float = 0.0) -> "SpectralCovariance":
        return cls(frequency, np.eye(6))

    def variance(self, weights) -> float:
        return joint_quadrature_variance(self, weights)

    def covariance(self, w1, w2) -> float:
        """Cross term ``w1^T S w2`` between two linear combinations."""
        return float(np.asarray(w1, float) @ self.matrix @ np.asarray(w2, float))

    def block(self, mode_a: int, mode_b: Optional[int] = None) -> np.ndarray:
        """2x2 block ``[[S_pp, S_pq], [S_qp, S_qq]]`` between two modes."""
        mode_b = mode_a if mode_b is None else mode_b
        return self.matrix[2 * mode_a:2 * mode_a + 2, 2 * mode_b:2 * mode_b + 2].copy()

    def swapped_twins(self) -> "SpectralCovariance":
        """Same matrix with the signal and idler labels exchanged."""
        perm = [0, 1, 4, 5, 2, 3]
        return SpectralCovariance(self.frequency, self.matrix[np.ix_(perm, perm)])


def joint_quadrature_variance(cov: SpectralCovariance, weights) -> float:
    """Noise ``w^T S w`` of the linear quadrature combination ``w``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (6,):
        raise ValueError(f"weights must have 6 entries, got shape {w.shape}")
    return float(w @ cov.matrix @ w)


@dataclass(frozen=True)
class Moments:
    """Second moments needed by the criteria, with optional standard errors.

    ``errors`` maps field names of :class:`CriteriaReport` to standard errors.
    """

    var_p_minus: float
    var_q_plus: float
    var_p0: float
    cov_p0_qplus: float
    n_samples: Optional[int] = None
    errors: Mapping[str, float] = field(default_factory=dict)


def moments_from_covariance(cov: SpectralCovariance) -> Moments:
    # half-sums avoid the 1/sqrt(2) rounding, so vacuum gives exactly 1
    s = cov.matrix
    return Moments(
        var_p_minus=0.5 * (s[2, 2] + s[4, 4] - 2.0 * s[2, 4]),
        var_q_plus=0.5 * (s[3, 3] + s[5, 5] + 2.0 * s[3, 5]),
        var_p0=float(s[0, 0]),
        cov_p0_qplus=cov.covariance(P0, Q_PLUS),
    )


def covariance_from_moments(m: Moments, frequency: float = 0.0) -> SpectralCovariance:
    """Smallest consistent 6x6 covariance carrying the given moments.

    Quadratures not fixed by ``m`` (q0, p+, q-) are set to shot noise and
    uncorrelated; the result is built in the sum/difference basis and rotated
    back to ``BASIS``.
    """
    # rows of U: p0, q0, p+, q+, p-, q- expressed in BASIS
    u = np.array([P0, Q0, P_PLUS, Q_PLUS, P_MINUS, Q_MINUS])
    d = np.eye(6)
    d[0, 0] = m.var_p0
    d[3, 3] = m.var_q_plus
    d[4, 4] = m.var_p_minus
    d[0, 3] = d[3, 0] = m.cov_p0_qplus
    return SpectralCovariance(frequency, u.T @ d @ u)


def pump_correction(cov) -> tuple:
    """Optimal pump-amplitude correction of the phase-sum noise.

    Parameters
    ----------
    cov : SpectralCovariance or Moments

    Returns
    -------
    alpha0, beta0, var_q_plus_corrected : float
        ``alpha0 = C/V``, ``beta0 = C**2/V`` with ``C`` the p0/q+ covariance and
        ``V`` the pump amplitude variance; the corrected variance is
        ``Var(q+) - beta0``, the minimum over alpha of ``Var(q+ - alpha p0)``.
    """
    m = cov if isinstance(cov, Moments) else moments_from_covariance(cov)
    if not m.var_p0 > 0:
        raise DegeneratePumpError(f"pump amplitude variance must be > 0, got {m.var_p0}")
    alpha0 = m.cov_p0_qplus / m.var_p0
    beta0 = m.cov_p0_qplus ** 2 / m.var_p0
    return alpha0, beta0, m.var_q_plus - beta0


@dataclass(frozen=True)
class CriteriaReport:
    var_p_minus: float
    var_q_plus: float
    alpha0: float
    beta0: float
    var_q_plus_corrected: float
    duan_simon_value: float
    vlf_value: float
    entangled_duan: bool
    entangled_vlf: bool
    quantum_correlation: bool
    stat_errors: Mapping[str, float] = field(default_factory=dict)

    def lines(self) -> list:
        """Human-readable report lines (values with errors, then verdicts)."""
        def fmt(name, value):
            err = self.stat_errors.get(name)
            return f"{name} = {value:.4f}" + (f" +/- {err:.4f}" if err is not None else "")

        out = [fmt(n, getattr(self, n)) for n in (
            "var_p_minus", "var_q_plus", "alpha0", "beta0", "var_q_plus_corrected",
            "duan_simon_value", "vlf_value")]
        out.append("duan_simon: " + ("ENTANGLED" if self.entangled_duan else "NOT ENTANGLED"))
        out.append("pump_corrected: " + ("ENTANGLED" if self.entangled_vlf else "NOT ENTANGLED"))
        out.append("QUANTUM CORRELATION: " + ("yes" if self.quantum_correlation else "no"))
        return out


def criteria_from_moments(m: Moments) -> CriteriaReport:
    alpha0, beta0, corrected = pump_correction(m)
    duan = m.var_p_minus + m.var_q_plus
    vlf = m.var_p_minus + corrected
    se_beta = m.errors.get("beta0")
    # nonzero means statistically resolved when an error bar exists
    beta_nonzero = abs(beta0) > (3.0 * se_beta if se_beta is not None else 1e-12)
    return CriteriaReport(
        var_p_minus=m.var_p_minus,
        var_q_plus=m.var_q_plus,
        alpha0=alpha0,
        beta0=beta0,
        var_q_plus_corrected=corrected,
        duan_simon_value=duan,
        vlf_value=vlf,
        entangled_duan=duan < 2.0,
        entangled_vlf=vlf < 2.0,
        quantum_correlation=bool(corrected < 1.0 and beta_nonzero),
        stat_errors=dict(m.errors),
    )


def criteria_report(cov: SpectralCovariance) -> CriteriaReport:
    """Duan-Simon and pump-corrected criteria for a spectral covariance."""
    return criteria_from_moments(moments_from_covariance(cov))


def _isserlis(sigma: np.ndarray, pairs, n: int) -> np.ndarray:
    """Covariance of unbiased sample second moments for Gaussian data."""
    k = len(pairs)
    out = np.empty((k, k))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            out[i, j] = (sigma[a, c] * sigma[b, d] + sigma[a, d] * sigma[b, c]) / (n - 1)
    return out


def estimate_moments(samples) -> Moments:
    """Sample moments of ``(p0, q+, p-)`` triples with Gaussian standard errors.

    Variances use the unbiased ``n - 1`` divisor.  Standard errors of derived
    quantities (beta0, corrected variance, criterion sums) follow from the
    delta method with the Gaussian fourth-moment covariance of the sample
    second moments, so ``SE(Var) = Var * sqrt(2 / (n - 1))``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"samples must have shape (n, 3), got {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    s = np.cov(x, rowvar=False, ddof=1)
    var_p0, var_qp, var_pm, c = s[0, 0], s[1, 1], s[2, 2], s[0, 1]

    # moment vector: (v_p0, v_q+, v_p-, c_p0q+)
    pairs = [(0, 0), (1, 1), (2, 2), (0, 1)]
    mom_cov = _isserlis(s, pairs, n)
    grads = {
        "var_p0": [1, 0, 0, 0],
        "var_q_plus": [0, 1, 0, 0],
        "var_p_minus": [0, 0, 1, 0],
        "cov_p0_qplus": [0, 0, 0, 1],
        "duan_simon_value": [0, 1, 1, 0],
    }
    if var_p0 > 0:
        b_v, b_c = -(c / var_p0) ** 2, 2.0 * c / var_p0
        grads["beta0"] = [b_v, 0, 0, b_c]
        grads["alpha0"] = [-c / var_p0 ** 2, 0, 0, 1.0 / var_p0]
        grads["var_q_plus_corrected"] = [-b_v, 1, 0, -b_c]
        grads["vlf_value"] = [-b_v, 1, 1, -b_c]
    errors = {}
    for name, g in grads.items():
        g = np.asarray(g, float)
        errors[name] = float(np.sqrt(max(g @ mom_cov @ g, 0.0)))
    return Moments(var_p_minus=float(var_pm), var_q_plus=float(var_qp), var_p0=float(var_p0),
                   cov_p0_qplus=float(c), n_samples=n, errors=errors)

"""Noise-ellipse rotation by reflection off a detuned analysis cavity.

The cavity is lossless and single-ended, with amplitude reflection

    r(x) = (1 + 2 i x) / (2 i x - 1)

for a frequency offset ``x`` from resonance in units of the cavity full
width.  ``r(0) = -1`` and ``r(+-inf) = 1``; the phase increases with ``x``.
A carrier at detuning ``D`` has its upper/lower noise sidebands at
``D +- W`` with ``W = Omega / bandwidth``.  After reflection the detected
amplitude quadrature is ``c_p p + c_q q`` with complex ``c_p``, ``c_q``
fixed by the three reflection coefficients.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError, UnphysicalCovarianceError
from .quadratures import SpectralCovariance


@dataclass(frozen=True)
class CavityParams:
    bandwidth: float = 14e6
    detuning: float = 0.0
    analysis_freq: float = 27e6

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ParameterError(f"cavity bandwidth={self.bandwidth} must be > 0")
        if math.isnan(self.detuning):
            raise ParameterError("cavity detuning must not be NaN (+-inf is the far-detuned limit)")
        if self.analysis_freq < 0:
            raise ParameterError("analysis_freq must be >= 0")

    @property
    def sideband_offset(self) -> float:
        """``Omega / bandwidth``, the same unit as the detuning."""
        return self.analysis_freq / self.bandwidth

    def at(self, detuning: float) -> "CavityParams":
        return dataclasses.replace(self, detuning=detuning)


def reflection(x) -> complex:
    """Amplitude reflection at offset ``x`` (cavity widths) from resonance."""
    x = np.asarray(x, dtype=float)
    r = (1 + 2j * x) / (2j * x - 1)
    return complex(r) if r.ndim == 0 else r


def carrier_sideband_response(params: CavityParams) -> tuple:
    """Reflection coefficients ``(r_carrier, r_plus, r_minus)``."""
    d, w = params.detuning, params.sideband_offset
    if math.isinf(d):
        return 1 + 0j, 1 + 0j, 1 + 0j
    return reflection(d), reflection(d + w), reflection(d - w)


def quadrature_coefficients(params: CavityParams) -> tuple:
    """Complex ``(c_p, c_q)`` mapping input quadratures to reflected amplitude."""
    r0, rp, rm = carrier_sideband_response(params)
    ref = np.conj(r0) / abs(r0)
    gp, gm = rp * ref, rm * ref
    return 0.5 * (gp + np.conj(gm)), 0.5j * (gp - np.conj(gm))


@dataclass(frozen=True)
class CavityWeights:
    """``noise = w_p S_pp + w_q S_qq + w_pq S_pq + w_vac``."""

    w_p: float
    w_q: float
    w_pq: float
    w_vac: float


def noise_weights(params: CavityParams) -> CavityWeights:
    cp, cq = quadrature_coefficients(params)
    w_p, w_q = abs(cp) ** 2, abs(cq) ** 2
    return CavityWeights(w_p, w_q, 2.0 * float((cp * np.conj(cq)).real), 1.0 - w_p - w_q)


def measured_noise(beam, params: CavityParams, tol: float = 1e-9) -> float:
    """Reflected amplitude noise of one beam.

    Parameters
    ----------
    beam : tuple or 2x2 array
        ``(S_pp, S_qq, S_pq)`` or the block ``[[S_pp, S_pq], [S_pq, S_qq]]``.
    """
    s_pp, s_qq, s_pq = _unpack_block(beam)
    if s_pp * s_qq - s_pq ** 2 < -tol * max(1.0, s_pp * s_qq) or s_pp < -tol or s_qq < -tol:
        raise UnphysicalCovarianceError(f"unphysical beam block ({s_pp}, {s_qq}, {s_pq})")
    wt = noise_weights(params)
    return wt.w_p * s_pp + wt.w_q * s_qq + wt.w_pq * s_pq + wt.w_vac


def _unpack_block(beam):
    b = np.asarray(beam, dtype=float)
    if b.shape == (3,):
        return float(b[0]), float(b[1]), float(b[2])
    if b.shape == (2, 2):
        if abs(b[0, 1] - b[1, 0]) > 1e-12 * max(1.0, np.max(np.abs(b))):
            raise UnphysicalCovarianceError("beam block not symmetric")
        return float(b[0, 0]), float(b[1, 1]), float(b[0, 1])
    raise ValueError(f"beam must be (S_pp, S_qq, S_pq) or 2x2, got shape {b.shape}")


@dataclass(frozen=True)
class ScanTable:
    delta: np.ndarray
    sum_noise: np.ndarray
    diff_noise: np.ndarray
    w_p: np.ndarray
    w_q: np.ndarray

    COLUMNS = ("delta", "sum_noise", "diff_noise", "w_p", "w_q")

    def rows(self):
        return zip(self.delta, self.sum_noise, self.diff_noise, self.w_p, self.w_q)


def _twin_matrix(beams) -> np.ndarray:
    if isinstance(beams, SpectralCovariance):
        return beams.matrix[2:, 2:]
    m = np.asarray(beams, dtype=float)
    if m.shape == (6, 6):
        return m[2:, 2:]
    if m.shape != (4, 4):
        raise ValueError("beams must be a SpectralCovariance, a 6x6 or a 4x4 (p1, q1, p2, q2) matrix")
    return m


def scan_curve(beams, delta_grid: Sequence[float], params: CavityParams) -> ScanTable:
    """Sum and difference photocurrent noise while both cavities scan together.

    ``beams`` carries the two-beam covariance ``(p1, q1, p2, q2)`` including
    the cross block; both beams see identical cavities.
    """
    grid = np.asarray(list(delta_grid), dtype=float)
    if grid.size == 0:
        raise ParameterError("delta grid is empty")
    m = _twin_matrix(beams)
    rows = []
    for d in grid:
        p = params.at(float(d))
        cp, cq = quadrature_coefficients(p)
        one = np.array([cp, cq])
        w_sum = np.concatenate([one, one]) / math.sqrt(2.0)
        w_diff = np.concatenate([one, -one]) / math.sqrt(2.0)
        wt = noise_weights(p)
        rows.append((float((w_sum @ m @ w_sum.conj()).real),
                     float((w_diff @ m @ w_diff.conj()).real), wt.w_p, wt.w_q))
    cols = np.array(rows).T
    return ScanTable(grid, cols[0], cols[1], cols[2], cols[3])

"""Measurement chain: demodulation, baseband sampling, block variances.

Photocurrents are mixed with a sinusoid at the analysis frequency, low-pass
filtered and sampled at 600 kHz; variances are taken over non-overlapping
groups of 1000 points and divided by the shot-noise reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy import signal

from .errors import AliasingError, InsufficientDataError, ParameterError, UnphysicalCovarianceError
from .quadratures import BASIS, SpectralCovariance

CHANNELS = ("pump", "signal", "idler", "shot_ref")
DEFAULT_SAMPLE_RATE = 600e3
DEFAULT_NU = 27e6
DEFAULT_RF_RATE = 120e6
DEFAULT_BLOCK = 1000

# quadratures seen by (pump, signal, idler) in each analysis-cavity window
WINDOWS = {
    "amplitude": ("p0", "p1", "p2"),
    "phase": ("p0", "q1", "q2"),
}


@dataclass
class BasebandTrace:
    """Demodulated photocurrents, equal-length channels in arbitrary units."""

    sample_rate: float
    channels: Mapping[str, np.ndarray]
    nu: float = DEFAULT_NU
    seed: Optional[int] = None
    calibration: float = 1.0
    quadratures: tuple = WINDOWS["amplitude"]

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate={self.sample_rate} must be > 0")
        chans = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {len(v) for v in chans.values()}
        if len(lengths) > 1:
            raise ParameterError(f"channels have unequal lengths {sorted(lengths)}")
        self.channels = chans

    def __len__(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def shot_units(self, block_size: int = DEFAULT_BLOCK) -> dict:
        """Channels rescaled so the shot reference has unit variance."""
        shot = block_variances(self.channels["shot_ref"], block_size)
        scale = 1.0 / math.sqrt(_mean_positive(shot.values))
        return {k: v * scale for k, v in self.channels.items() if k != "shot_ref"}


@dataclass
class VarianceSeries:
    block_size: int
    values: np.ndarray
    normalized: bool = False
    sql_reference: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ParameterError("block variances must be >= 0")
        if self.normalized and not (self.sql_reference and self.sql_reference > 0):
            raise ParameterError("normalized series needs a positive sql_reference")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def stderr(self) -> float:
        """Standard error of the mean block variance (block-to-block scatter)."""
        n = len(self.values)
        return float(np.std(self.values, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")


def _target_matrix(target, quadratures) -> np.ndarray:
    if isinstance(target, SpectralCovariance):
        idx = [BASIS.index(q) for q in quadratures]
        return target.matrix[np.ix_(idx, idx)]
    if isinstance(target, Mapping):
        return np.diag([float(target.get(c, 1.0)) for c in CHANNELS[:3]])
    m = np.asarray(target, dtype=float)
    if m.shape != (3, 3):
        raise ParameterError("target must be a SpectralCovariance, a channel->variance map or 3x3")
    return m


def synthesize_baseband(target, n_samples: int, sample_rate: float = DEFAULT_SAMPLE_RATE,
                        seed: int = 0, window: str = "amplitude", calibration: float = 1.0,
                        nu: float = DEFAULT_NU, block_size: int = DEFAULT_BLOCK) -> BasebandTrace:
    """Gaussian baseband fixture with prescribed shot-normalized covariance.

    ``window`` picks which quadratures (see ``WINDOWS``) the pump/signal/idler
    channels carry when ``target`` is a :class:`SpectralCovariance`.  The
    shot reference is an independent unit-variance channel; every channel is
    scaled by ``sqrt(calibration)``.
    """
    if window not in WINDOWS:
        raise ParameterError(f"window must be one of {sorted(WINDOWS)}")
    if n_samples < block_size:
        raise InsufficientDataError(f"n_samples={n_samples} smaller than one block ({block_size})")
    cov = _target_matrix(target, WINDOWS[window])
    if np.max(np.abs(cov - cov.T)) > 1e-12 * max(1.0, np.max(np.abs(cov))):
        raise UnphysicalCovarianceError("target covariance not symmetric")
    lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    if lam[0] < -1e-9 * max(1.0, lam[-1]):
        raise UnphysicalCovarianceError(f"target covariance not positive semidefinite ({lam[0]:.3g})")
    root = vec * np.sqrt(np.clip(lam, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, 4))
    gain = math.sqrt(calibration)
    x = z[:, :3] @ root.T * gain
    chans = {"pump": x[:, 0], "signal": x[:, 1], "idler": x[:, 2], "shot_ref": z[:, 3] * gain}
    return BasebandTrace(sample_rate, chans, nu=nu, seed=seed, calibration=calibration,
                         quadratures=WINDOWS[window])


@dataclass(frozen=True)
class LowPass:
    taps: np.ndarray
    decimation: int
    gain: float


def design_lowpass(rf_rate: float, out_rate: float, atten_db: float = 60.0) -> LowPass:
    """Linear-phase Kaiser FIR: passband edge 0.4 out_rate, stopband 0.5 out_rate."""
    ratio = rf_rate / out_rate
    decimation = int(round(ratio))
    if decimation < 1 or abs(ratio - decimation) > 1e-9 * ratio:
        raise AliasingError(f"rf_rate/out_rate = {ratio:g} must be an integer decimation factor")
    nyq = 0.5 * rf_rate
    width = 0.1 * out_rate / nyq
    numtaps, beta = signal.kaiserord(atten_db + 2.0, width)
    numtaps |= 1
    taps = signal.firwin(numtaps, 0.45 * out_rate / nyq, window=("kaiser", beta))
    # unit-PSD white noise -> unit baseband variance after mixing by cos
    gain = 1.0 / math.sqrt(0.5 * rf_rate * float(np.sum(taps ** 2)))
    return LowPass(taps, decimation, gain)


def demodulate(rf_trace, rf_rate: float, nu: float = DEFAULT_NU, lo_phase: float = 0.0,
               out_rate: float = DEFAULT_SAMPLE_RATE, quadrature: bool = False,
               lowpass: Optional[LowPass] = None):
    """Mix with ``cos(2 pi nu t + lo_phase)``, low-pass and decimate.

    Gain is set so white noise with unit two-sided spectral density (units^2
    per Hz) gives unit baseband variance.  Output samples affected by the
    filter start-up are dropped.  With ``quadrature=True`` the sine-mixed
    channel is returned as well.
    """
    if rf_rate < 4 * nu:
        raise AliasingError(f"rf_rate={rf_rate:g} below 4 * nu = {4 * nu:g}")
    if out_rate > 0.5 * nu:
        raise AliasingError(f"out_rate={out_rate:g} too high for nu={nu:g}")
    lp = lowpass or design_lowpass(rf_rate, out_rate)
    x = np.asarray(rf_trace, dtype=float)
    t = np.arange(len(x)) / rf_rate
    arg = 2 * np.pi * nu * t + lo_phase

    def one(mixed):
        y = signal.upfirdn(lp.taps, mixed, down=lp.decimation) * lp.gain
        skip = -(-(len(lp.taps) - 1) // lp.decimation)
        end = len(x) // lp.decimation
        return y[skip:end]

    i = one(x * np.cos(arg))
    return (i, one(-x * np.sin(arg))) if quadrature else i


def block_variances(channel, block_size: int = DEFAULT_BLOCK) -> VarianceSeries:
    """Unbiased variances of consecutive non-overlapping blocks; remainder dropped."""
    x = np.asarray(channel, dtype=float)
    if block_size < 2:
        raise ParameterError("block_size must be >= 2")
    n_blocks = len(x) // block_size
    if n_blocks == 0:
        raise InsufficientDataError(f"{len(x)} samples < block size {block_size}")
    blocks = x[:n_blocks * block_size].reshape(n_blocks, block_size)
    return VarianceSeries(block_size, blocks.var(axis=1, ddof=1))


def _mean_positive(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("shot-noise reference series is empty")
    m = float(np.mean(v))
    if not m > 0:
        raise ParameterError("shot-noise reference has zero mean variance")
    return m


def normalize_to_sql(series: VarianceSeries, shot_series: VarianceSeries) -> VarianceSeries:
    ref = _mean_positive(shot_series.values)
    return VarianceSeries(series.block_size, series.values / ref, normalized=True, sql_reference=ref)


def trace_samples(trace: BasebandTrace, block_size: int = DEFAULT_BLOCK) -> dict:
    """Map the trace's quadrature labels to shot-normalized sample arrays."""
    scaled = trace.shot_units(block_size)
    return {q: scaled[c] for q, c in zip(trace.quadratures, CHANNELS[:3])}


def criteria_samples(amplitude: BasebandTrace, phase: BasebandTrace,
                     block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """``(p0, q+, p-)`` triples from an amplitude-window and a phase-window trace.

    ``p0`` and ``q+`` come from the phase window (they must be simultaneous to
    carry their correlation); ``p-`` from the amplitude window.  Records are
    truncated to the shorter length.
    """
    a = trace_samples(amplitude, block_size)
    p = trace_samples(phase, block_size)
    for need, src in ((("p1", "p2"), a), (("p0", "q1", "q2"), p)):
        missing = [q for q in need if q not in src]
        if missing:
            raise ParameterError(f"trace lacks quadratures {missing}")
    n = min(len(a["p1"]), len(p["q1"]))
    q_plus = (p["q1"][:n] + p["q2"][:n]) / math.sqrt(2.0)
    p_minus = (a["p1"][:n] - a["p2"][:n]) / math.sqrt(2.0)
    return np.column_stack([p["p0"][:n], q_plus, p_minus])

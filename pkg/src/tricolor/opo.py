"""Linearized three-mode model of the above-threshold OPO.

Intracavity equations, with time in units of the twin-cavity lifetime
``1/kappa`` (``kappa`` = amplitude decay rate of signal/idler)::

    da0/dt = -(r + i D0) a0 - g a1 a2 + sqrt(2 r_ext) A_in
    da1/dt = -(1 + i D)  a1 + g a0 conj(a2)
    da2/dt = -(1 + i D)  a2 + g a0 conj(a1)

``r`` is the pump-to-twin decay ratio, ``D0``/``D`` the pump/twin detunings
in units of ``kappa``.  Each mode couples to one detected port plus one lumped
loss port.  Fluctuations are linearized about the oscillating steady state
and propagated to the detected output quadratures through input-output
relations.  ``kappa = pi * bw_twin`` with ``bw_twin`` the full width in Hz, so
an analysis frequency ``Omega`` (Hz) maps to ``2 Omega / bw_twin``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ModelError, NoOscillationError, ParameterError
from .quadratures import SpectralCovariance

N_PORTS = 12  # detected inputs (p,q) x 3 modes, then loss ports (p,q) x 3


@dataclass(frozen=True)
class OpoParams:
    """OPO operating point and detection chain.

    ``sigma`` is the pump power relative to the oscillation threshold at the
    given detunings.  ``excess_pump_phase_noise`` is added to the input pump
    phase quadrature (shot noise = 1, so the input phase noise is ``1 + S``).
    ``coupling`` scales the nonlinear gain; 0 turns the crystal off and leaves
    an empty cavity.
    """

    sigma: float = 1.34
    delta0: float = 0.0
    delta: float = 0.0
    bw_twin: float = 50e6
    pump_coupling: float = 0.03
    pump_loss: float = 0.0
    twin_coupling: float = 0.04
    twin_loss: float = 0.007
    excess_pump_phase_noise: float = 0.0
    eta_twin: float = 0.80
    eta_pump: float = 0.45
    coupling: float = 1.0
    threshold_power_mw: float = 12.0
    optical_freqs: Optional[tuple] = None

    def __post_init__(self):
        checks = [
            (self.sigma > 0, "sigma", "must be > 0"),
            (self.bw_twin > 0, "bw_twin", "must be > 0"),
            (self.pump_coupling > 0, "pump_coupling", "must be > 0"),
            (self.twin_coupling > 0, "twin_coupling", "must be > 0"),
            (self.pump_loss >= 0, "pump_loss", "must be >= 0"),
            (self.twin_loss >= 0, "twin_loss", "must be >= 0"),
            (self.excess_pump_phase_noise >= 0, "excess_pump_phase_noise", "must be >= 0"),
            (0.0 <= self.eta_twin <= 1.0, "eta_twin", "must lie in [0, 1]"),
            (0.0 <= self.eta_pump <= 1.0, "eta_pump", "must lie in [0, 1]"),
            (self.coupling >= 0, "coupling", "must be >= 0"),
            (self.threshold_power_mw > 0, "threshold_power_mw", "must be > 0"),
        ]
        for ok, name, msg in checks:
            if not ok or not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name}={getattr(self, name)!r} {msg}")
        for name in ("delta0", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.optical_freqs is not None:
            w0, w1, w2 = (float(v) for v in self.optical_freqs)
            if not math.isclose(w0, w1 + w2, rel_tol=1e-12):
                raise ParameterError(f"optical_freqs violate w0 = w1 + w2: {w0} != {w1} + {w2}")
            object.__setattr__(self, "optical_freqs", (w0, w1, w2))

    def replace(self, **changes) -> "OpoParams":
        return dataclasses.replace(self, **changes)

    @property
    def decay_ratio(self) -> float:
        """Pump amplitude decay rate over the twin decay rate."""
        return (self.pump_coupling + self.pump_loss) / (self.twin_coupling + self.twin_loss)

    @property
    def twin_escape(self) -> float:
        return self.twin_coupling / (self.twin_coupling + self.twin_loss)

    @property
    def pump_escape(self) -> float:
        return self.pump_coupling / (self.pump_coupling + self.pump_loss)

    @property
    def kappa(self) -> float:
        """Twin amplitude decay rate in rad/s."""
        return math.pi * self.bw_twin

    def normalized_frequency(self, omega_hz: float) -> float:
        return 2.0 * omega_hz / self.bw_twin


@dataclass(frozen=True)
class SteadyState:
    pump: complex
    signal: complex
    idler: complex
    input_pump: float
    oscillating: bool

    @property
    def twin_intensity(self) -> float:
        return abs(self.signal) ** 2

    def output_pump(self, params: OpoParams) -> complex:
        """Mean reflected pump field (detected port)."""
        r_ext = params.decay_ratio * params.pump_escape
        return math.sqrt(2.0 * r_ext) * self.pump - self.input_pump


def intracavity_drift(a, params: OpoParams, input_pump: float) -> np.ndarray:
    """Deterministic part of the nonlinear equations for complex ``a = (a0, a1, a2)``."""
    a0, a1, a2 = a
    r = params.decay_ratio
    g = params.coupling
    r_ext = r * params.pump_escape
    return np.array([
        -(r + 1j * params.delta0) * a0 - g * a1 * a2 + math.sqrt(2 * r_ext) * input_pump,
        -(1 + 1j * params.delta) * a1 + g * a0 * np.conj(a2),
        -(1 + 1j * params.delta) * a2 + g * a0 * np.conj(a1),
    ])


def _input_amplitude(params: OpoParams) -> float:
    r = params.decay_ratio
    g = params.coupling if params.coupling > 0 else 1.0
    r_ext = r * params.pump_escape
    a_th = math.sqrt((1 + params.delta ** 2) * (r ** 2 + params.delta0 ** 2) / (2 * r_ext)) / g
    return math.sqrt(params.sigma) * a_th


def _intensity_roots(params: OpoParams) -> list:
    """Positive roots ``x = g^2 I / (1 + D^2)`` of the steady-state condition.

    ``|r + i D0 + x (1 - i D)|^2 = sigma (r^2 + D0^2)``, with sigma measured
    from the detuned threshold (``x = 0``).
    """
    r, d0, d = params.decay_ratio, params.delta0, params.delta
    qa = 1 + d * d
    qb = 2 * (r - d0 * d)
    qc = (1 - params.sigma) * (r * r + d0 * d0)
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    roots = [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
    return sorted((x for x in roots if x > 0), reverse=True)


def _state_from_root(params: OpoParams, x: float) -> SteadyState:
    r, d0, d = params.decay_ratio, params.delta0, params.delta
    g = params.coupling
    a_in = _input_amplitude(params)
    r_ext = r * params.pump_escape
    a0 = math.sqrt(2 * r_ext) * a_in / (r + 1j * d0 + x * (1 - 1j * d))
    if x <= 0:
        return SteadyState(complex(a0), 0j, 0j, a_in, False)
    amp = math.sqrt(x * (1 + d * d)) / g
    # a1 a2 = g a0 |a|^2 / (1 + i D); split the phase sum evenly (phi1 = phi2)
    half = 0.5 * (np.angle(a0) - math.atan2(d, 1.0))
    a1 = amp * np.exp(1j * half)
    return SteadyState(complex(a0), complex(a1), complex(a1), a_in, True)


def steady_state(params: OpoParams) -> SteadyState:
    """Classical intracavity amplitudes; ``oscillating`` is False below threshold."""
    if params.coupling == 0:
        return _state_from_root(params, 0.0)
    for x in _intensity_roots(params):
        state = _state_from_root(params, x)
        if _is_stable(_drift_matrix(params, state)):
            return state
    return _state_from_root(params, 0.0)


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _linear_block(m: complex) -> np.ndarray:
    """Real 2x2 action of ``z -> m z`` on ``(Re z, Im z)``."""
    return np.array([[m.real, -m.imag], [m.imag, m.real]])


def _conjugate_block(n: complex) -> np.ndarray:
    """Real 2x2 action of ``z -> n conj(z)``."""
    return np.array([[n.real, n.imag], [n.imag, -n.real]])


def _phases(state: SteadyState) -> list:
    return [float(np.angle(v)) if abs(v) > 0 else 0.0 for v in (state.pump, state.signal, state.idler)]


def _drift_matrix(params: OpoParams, state: SteadyState) -> np.ndarray:
    g = params.coupling
    r = params.decay_ratio
    a0, a1, a2 = state.pump, state.signal, state.idler
    # d(da)/dt = M da + N conj(da)
    m = np.zeros((3, 3), complex)
    n = np.zeros((3, 3), complex)
    m[0, 0] = -(r + 1j * params.delta0)
    m[0, 1] = -g * a2
    m[0, 2] = -g * a1
    m[1, 1] = m[2, 2] = -(1 + 1j * params.delta)
    m[1, 0] = g * np.conj(a2)
    m[2, 0] = g * np.conj(a1)
    n[1, 2] = g * a0
    n[2, 1] = g * a0
    ph = _phases(state)
    drift = np.zeros((6, 6))
    for j in range(3):
        for k in range(3):
            mjk = np.exp(-1j * ph[j]) * m[j, k] * np.exp(1j * ph[k])
            njk = np.exp(-1j * ph[j]) * n[j, k] * np.exp(-1j * ph[k])
            drift[2 * j:2 * j + 2, 2 * k:2 * k + 2] = _linear_block(mjk) + _conjugate_block(njk)
    return drift


def _is_stable(drift: np.ndarray) -> bool:
    lam = np.linalg.eigvals(drift)
    return bool(np.max(lam.real) <= 1e-9 * max(1.0, np.max(np.abs(lam))))


@dataclass(frozen=True)
class LinearizedSystem:
    """``dX = A X dt + B dW``; output ``Y = C X + D xi`` with ``<xi xi^T> = N``.

    ``X`` holds intracavity quadratures in the steady-state frames; ``Y`` the
    output quadratures (before detection loss) in the frames of the output
    mean fields.  Inputs ``xi`` follow the ``N_PORTS`` ordering.
    """

    drift: np.ndarray
    input_map: np.ndarray
    output_map: np.ndarray
    feedthrough: np.ndarray
    input_noise: np.ndarray
    state: SteadyState

    def transfer(self, omega_norm: float) -> np.ndarray:
        # the twin phase difference diffuses freely (zero eigenvalue), so the
        # q- spectrum diverges as 1/omega^2 and is undefined at omega = 0
        if omega_norm == 0 and np.min(np.abs(np.linalg.eigvals(self.drift))) < 1e-9:
            raise ModelError("spectrum undefined at zero frequency (undamped phase-difference mode)")
        resolvent = np.linalg.solve(1j * omega_norm * np.eye(6) - self.drift, self.input_map)
        return self.output_map @ resolvent + self.feedthrough


def linearize(params: OpoParams) -> LinearizedSystem:
    """Analytic linearization about the steady state.

    Raises
    ------
    NoOscillationError
        Below threshold (unless the crystal is switched off).
    ModelError
        If the steady state is unstable or the reflected pump mean vanishes.
    """
    state = steady_state(params)
    if params.coupling > 0 and not state.oscillating:
        raise NoOscillationError(
            f"sigma={params.sigma} is below the oscillation threshold "
            f"(delta0={params.delta0}, delta={params.delta})")
    drift = _drift_matrix(params, state)
    if not _is_stable(drift):
        raise ModelError("steady state is unstable for these parameters")

    r = params.decay_ratio
    ext = [r * params.pump_escape, params.twin_escape, params.twin_escape]
    loss = [r - ext[0], 1 - ext[1], 1 - ext[2]]
    ph = _phases(state)
    out_pump = state.output_pump(params)
    if abs(out_pump) < 1e-9 * max(1.0, state.input_pump):
        raise ModelError("reflected pump mean field vanishes; amplitude quadrature undefined")
    out_ph = [float(np.angle(out_pump)), ph[1], ph[2]]
    in_ph = [0.0, ph[1], ph[2]]  # pump input referenced to the real input field

    b = np.zeros((6, N_PORTS))
    c = np.zeros((6, 6))
    d = np.zeros((6, N_PORTS))
    for j in range(3):
        s = slice(2 * j, 2 * j + 2)
        b[s, 2 * j:2 * j + 2] = math.sqrt(2 * ext[j]) * _rot(in_ph[j] - ph[j])
        b[s, 6 + 2 * j:8 + 2 * j] = math.sqrt(2 * loss[j]) * np.eye(2)
        c[s, s] = math.sqrt(2 * ext[j]) * _rot(ph[j] - out_ph[j])
        d[s, 2 * j:2 * j + 2] = -_rot(in_ph[j] - out_ph[j])
    noise = np.eye(N_PORTS)
    noise[1, 1] += params.excess_pump_phase_noise
    return LinearizedSystem(drift, b, c, d, noise, state)


def apply_detection_loss(cov: SpectralCovariance, eta_twin: float, eta_pump: float) -> SpectralCovariance:
    """Beam-splitter loss: ``S -> E S E + I - E^2`` with ``E = diag(sqrt(eta))``."""
    for name, eta in (("eta_twin", eta_twin), ("eta_pump", eta_pump)):
        if not 0.0 <= eta <= 1.0:
            raise ParameterError(f"{name}={eta} must lie in [0, 1]")
    e = np.sqrt(np.array([eta_pump, eta_pump, eta_twin, eta_twin, eta_twin, eta_twin]))
    m = cov.matrix * np.outer(e, e) + np.diag(1.0 - e ** 2)
    return SpectralCovariance(cov.frequency, 0.5 * (m + m.T))


def spectral_covariance(params: OpoParams, omega: float, detected: bool = True) -> SpectralCovariance:
    """Output quadrature spectral covariance at analysis frequency ``omega`` (Hz).

    With ``detected=False`` the detection efficiencies are not applied.
    """
    system = linearize(params)
    t = system.transfer(params.normalized_frequency(omega))
    m = (t @ system.input_noise @ t.conj().T).real
    cov = SpectralCovariance(omega, 0.5 * (m + m.T))
    if detected:
        cov = apply_detection_loss(cov, params.eta_twin, params.eta_pump)
    return cov


def excess_noise_decomposition(params: OpoParams, omega: float) -> tuple:
    """Split the detected covariance as ``base + S * unit``.

    ``base`` is the detected 6x6 matrix without excess pump noise and
    ``unit`` the detected response to one shot-noise unit of input pump
    phase noise; the spectrum is affine in ``excess_pump_phase_noise``.
    """
    system = linearize(params)
    t = system.transfer(params.normalized_frequency(omega))
    noise = system.input_noise.copy()
    noise[1, 1] = 1.0
    base = (t @ noise @ t.conj().T).real
    col = t[:, 1]
    unit = np.outer(col, col.conj()).real
    e = np.sqrt(np.array([params.eta_pump] * 2 + [params.eta_twin] * 4))
    base = 0.5 * (base + base.T) * np.outer(e, e) + np.diag(1.0 - e ** 2)
    return base, unit * np.outer(e, e)


def twin_difference_noise(params: OpoParams, omega: float) -> float:
    """Closed-form detected ``Var(p-)`` for zero twin detuning.

    ``1 - eta * escape / (1 + (Omega'/2)^2)``: a Lorentzian dip of width
    twice the twin decay rate, perfectly squeezed at zero frequency for unit
    efficiencies.
    """
    if params.delta != 0:
        raise ParameterError("closed form holds only for delta = 0")
    w = params.normalized_frequency(omega)
    return 1.0 - params.eta_twin * params.twin_escape / (1.0 + 0.25 * w * w)

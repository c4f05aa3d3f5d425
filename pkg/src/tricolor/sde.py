"""Time-domain Monte Carlo oracle for the OPO output spectra.

Fluctuations are integrated with Euler-Maruyama in Cartesian coordinates
``(Re a_j, Im a_j)``.  The drift comes from a finite-difference Jacobian of
:func:`tricolor.opo.intracavity_drift`, so nothing here reuses the analytic
quadrature-frame linearization of :mod:`tricolor.opo`.  Spectra at a single
analysis frequency are estimated from Hann-windowed, half-overlapping
segments; standard errors come from the scatter between trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ModelError, NoOscillationError, ParameterError, StepSizeError
from .opo import OpoParams, SteadyState, intracavity_drift, steady_state

N_STREAMS = 18  # 6 detected-port inputs, 6 loss-port inputs, 6 detection vacua
MAX_RATE_STEP = 0.05
MIN_DURATION = 1000.0


@dataclass(frozen=True)
class CartesianModel:
    jacobian: np.ndarray       # 6x6 drift of (Re, Im) fluctuations
    noise_in: np.ndarray       # 6x18, intracavity drive per unit Wiener increment
    out_state: np.ndarray      # 6x6, output quadratures from intracavity state
    out_noise: np.ndarray      # 6x18, direct output feed of the white inputs
    state: SteadyState


def _realify(z: np.ndarray) -> np.ndarray:
    return np.column_stack([z.real, z.imag]).ravel()


def _complexify(u: np.ndarray) -> np.ndarray:
    return u[0::2] + 1j * u[1::2]


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cartesian_model(params: OpoParams, step: float = 1e-6) -> CartesianModel:
    state = steady_state(params)
    if params.coupling > 0 and not state.oscillating:
        raise NoOscillationError(f"sigma={params.sigma} is below the oscillation threshold")
    a_ss = np.array([state.pump, state.signal, state.idler])
    residual = intracavity_drift(a_ss, params, state.input_pump)
    scale = max(1.0, float(np.max(np.abs(a_ss))))
    if np.max(np.abs(residual)) > 1e-9 * scale:
        raise ModelError(f"steady state does not solve the equations (residual {np.max(np.abs(residual)):.3g})")

    u0 = _realify(a_ss)
    jac = np.empty((6, 6))
    for k in range(6):
        du = np.zeros(6)
        du[k] = step * scale
        fp = _realify(intracavity_drift(_complexify(u0 + du), params, state.input_pump))
        fm = _realify(intracavity_drift(_complexify(u0 - du), params, state.input_pump))
        jac[:, k] = (fp - fm) / (2 * du[k])

    r = params.decay_ratio
    ext = [r * params.pump_escape, params.twin_escape, params.twin_escape]
    loss = [r - ext[0], 1 - ext[1], 1 - ext[2]]
    out_mean = [math.sqrt(2 * ext[0]) * state.pump - state.input_pump,
                math.sqrt(2 * ext[1]) * state.signal,
                math.sqrt(2 * ext[2]) * state.idler]
    out_phase = [float(np.angle(m)) if abs(m) > 0 else 0.0 for m in out_mean]
    eta = [params.eta_pump, params.eta_twin, params.eta_twin]
    excess = math.sqrt(1.0 + params.excess_pump_phase_noise)

    noise_in = np.zeros((6, N_STREAMS))
    out_state = np.zeros((6, 6))
    out_noise = np.zeros((6, N_STREAMS))
    for j in range(3):
        s = slice(2 * j, 2 * j + 2)
        # input field in Cartesian axes; pump phase quadrature is the Im axis
        shape = np.diag([1.0, excess]) if j == 0 else np.eye(2)
        noise_in[s, 2 * j:2 * j + 2] = math.sqrt(2 * ext[j]) * shape
        noise_in[s, 6 + 2 * j:8 + 2 * j] = math.sqrt(2 * loss[j]) * np.eye(2)
        to_frame = _rot(-out_phase[j])
        out_state[s, s] = math.sqrt(eta[j]) * to_frame * math.sqrt(2 * ext[j])
        out_noise[s, 2 * j:2 * j + 2] = -math.sqrt(eta[j]) * to_frame @ shape
        out_noise[s, 12 + 2 * j:14 + 2 * j] = math.sqrt(1 - eta[j]) * np.eye(2)
    return CartesianModel(jac, noise_in, out_state, out_noise, state)


def _trajectory_rngs(seed: int, first: int, count: int) -> list:
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(first + i,)))
            for i in range(count)]


def _check_step(model: CartesianModel, dt: float, duration: float, omega_norm: float = 0.0):
    rates = np.abs(np.linalg.eigvals(model.jacobian))
    fastest = max(float(np.max(rates)), 1.0, omega_norm)
    if dt * fastest > MAX_RATE_STEP:
        raise StepSizeError(f"dt={dt} too coarse: need dt <= {MAX_RATE_STEP / fastest:.4g}")
    if duration < MIN_DURATION:
        raise StepSizeError(f"duration={duration} must cover >= {MIN_DURATION:g} cavity lifetimes")


def _default_burn_in(model: CartesianModel) -> float:
    re = -np.linalg.eigvals(model.jacobian).real
    slow = re[re > 1e-6]
    return min(50.0 / float(np.min(slow)), 2000.0) if slow.size else 0.0


def _output_blocks(model: CartesianModel, dt: float, n_steps: int, burn_steps: int,
                   rngs: list, block: int = 2000):
    """Yield ``(start, y)`` output blocks of shape ``(len, n_traj, 6)``.

    Outputs are bin averages: the state enters at the midpoint of each step
    and the white inputs as ``dW / dt``.
    """
    n_traj = len(rngs)
    f_t = (np.eye(6) + model.jacobian * dt).T
    b_t = model.noise_in.T
    c_t = model.out_state.T
    d_t = model.out_noise.T
    sqdt = math.sqrt(dt)
    u = np.zeros((n_traj, 6))
    total = burn_steps + n_steps
    done = 0
    while done < total:
        m = min(block, total - done)
        raw = np.empty((n_traj, m, N_STREAMS))
        for i, rng in enumerate(rngs):
            rng.standard_normal(out=raw[i])
        dw = np.swapaxes(raw, 0, 1)
        dw *= sqdt
        drive = dw @ b_t
        hist = np.empty((m + 1, n_traj, 6))
        hist[0] = u
        for k in range(m):
            u = u @ f_t + drive[k]
            hist[k + 1] = u
        y = 0.5 * (hist[:-1] + hist[1:]) @ c_t + (dw / dt) @ d_t
        lo = done - burn_steps
        if lo + m > 0:
            skip = max(0, -lo)
            yield max(lo, 0), y[skip:]
        done += m


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Detected output quadratures ``outputs[traj, sample, quad]`` in BASIS order.

    Time is in units of the twin-cavity lifetime; ``dt`` is the sample step.
    """

    dt: float
    outputs: np.ndarray
    seed: int
    state: SteadyState

    def spectral_covariance(self, omega_norm: float, segment: float = 200.0):
        est = _SingleBinWelch(omega_norm, self.dt, segment, self.outputs.shape[0])
        est.feed(0, np.swapaxes(self.outputs, 0, 1))
        return est.result()


def simulate_trajectories(params: OpoParams, dt: float = 0.005, duration: float = 1000.0,
                          n_traj: int = 8, seed: int = 0, burn_in=None) -> TrajectoryEnsemble:
    """Euler-Maruyama ensemble of the linearized stochastic equations.

    Trajectory ``i`` draws its noise from ``SeedSequence(seed, spawn_key=(i,))``,
    so results do not depend on how trajectories are batched.  Memory grows as
    ``n_traj * duration / dt``; use :func:`monte_carlo_covariance` for long runs.
    """
    if n_traj < 1:
        raise ParameterError("n_traj must be >= 1")
    model = cartesian_model(params)
    _check_step(model, dt, duration)
    burn = _default_burn_in(model) if burn_in is None else burn_in
    n_steps = int(round(duration / dt))
    out = np.empty((n_steps, n_traj, 6))
    for start, y in _output_blocks(model, dt, n_steps, int(round(burn / dt)),
                                   _trajectory_rngs(seed, 0, n_traj)):
        out[start:start + len(y)] = y
    return TrajectoryEnsemble(dt, np.ascontiguousarray(np.swapaxes(out, 0, 1)), seed, model.state)


class _SingleBinWelch:
    """Hann-windowed cross-spectral matrix at one frequency, 50% overlap."""

    def __init__(self, omega_norm: float, dt: float, segment: float, n_traj: int):
        self.length = int(round(segment / dt))
        if self.length < 8:
            raise ParameterError("segment too short for the step size")
        self.hop = self.length // 2
        n = np.arange(self.length)
        self.window = np.sin(np.pi * (n + 0.5) / self.length) ** 2
        self.omega = omega_norm
        self.dt = dt
        self.norm = 1.0 / (dt * np.sum(self.window ** 2))
        self.acc = {}
        self.sums = np.zeros((n_traj, 6, 6))
        self.count = 0

    def feed(self, start: int, y: np.ndarray):
        """Add samples ``y[n, traj, quad]`` beginning at global index ``start``."""
        stop = start + len(y)
        first = max(0, (start - self.length) // self.hop + 1)
        k = first
        while k * self.hop < stop:
            s0 = k * self.hop
            lo, hi = max(start, s0), min(stop, s0 + self.length)
            if lo < hi:
                idx = np.arange(lo, hi)
                kern = self.window[idx - s0] * np.exp(-1j * self.omega * idx * self.dt)
                part = np.tensordot(kern, y[lo - start:hi - start], axes=(0, 0)) * self.dt
                self.acc[k] = self.acc.get(k, 0) + part
                if hi == s0 + self.length:
                    x = self.acc.pop(k)
                    p = np.einsum("ti,tj->tij", x, x.conj()).real
                    self.sums += p * self.norm
                    self.count += 1
            k += 1

    def result(self):
        if self.count == 0:
            raise ParameterError("record shorter than one spectral segment")
        per_traj = self.sums / self.count
        per_traj = 0.5 * (per_traj + np.swapaxes(per_traj, 1, 2))
        mean = per_traj.mean(axis=0)
        n_traj = per_traj.shape[0]
        se = per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.full((6, 6), np.nan)
        return MonteCarloSpectrum(mean, se, n_traj, self.count, per_traj)


@dataclass(frozen=True)
class MonteCarloSpectrum:
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    n_segments: int
    per_trajectory: Optional[np.ndarray] = None

    def functional(self, w1, w2=None) -> tuple:
        """Mean and standard error of ``w1^T S w2`` from trajectory scatter."""
        w2 = w1 if w2 is None else w2
        vals = np.einsum("i,tij,j->t", np.asarray(w1, float), self.per_trajectory, np.asarray(w2, float))
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))

    def zscores(self, reference: np.ndarray) -> np.ndarray:
        """``(mean - reference) / stderr`` on the 21 upper-triangle entries."""
        iu = np.triu_indices(6)
        return (self.mean[iu] - np.asarray(reference)[iu]) / self.stderr[iu]


def monte_carlo_covariance(params: OpoParams, omega: float, n_traj: int = 200, dt: float = 0.005,
                           duration: float = 1000.0, seed: int = 0, segment: float = 200.0,
                           batch: int = 200, burn_in=None) -> MonteCarloSpectrum:
    """Estimate the detected spectral covariance at ``omega`` (Hz) by simulation.

    The segment length (in cavity lifetimes) sets the resolution; the default
    200 gives a Hann noise bandwidth of about 0.02 of the twin cavity width,
    which keeps the window-smoothing bias well below the sampling error.
    """
    if n_traj < 2:
        raise ParameterError("n_traj must be >= 2 to estimate standard errors")
    model = cartesian_model(params)
    w = params.normalized_frequency(omega)
    _check_step(model, dt, duration, w)
    burn = _default_burn_in(model) if burn_in is None else burn_in
    n_steps = int(round(duration / dt))
    parts = []
    for first in range(0, n_traj, batch):
        count = min(batch, n_traj - first)
        est = _SingleBinWelch(w, dt, segment, count)
        for start, y in _output_blocks(model, dt, n_steps, int(round(burn / dt)),
                                       _trajectory_rngs(seed, first, count)):
            est.feed(start, y)
        parts.append((est.sums / est.count, est.count))
    per_traj = np.concatenate([p for p, _ in parts])
    per_traj = 0.5 * (per_traj + np.swapaxes(per_traj, 1, 2))
    return MonteCarloSpectrum(per_traj.mean(axis=0), per_traj.std(axis=0, ddof=1) / math.sqrt(n_traj),
                              n_traj, parts[0][1], per_traj)

"""Quantum-noise toolkit for a three-mode (pump, signal, idler) OPO."""

from .analysis_cavity import CavityParams, measured_noise, noise_weights, scan_curve
from .errors import ModelError, ParameterError, TricolorError
from .fit import SigmaScanData, fit_parameters, predict_sigma_scan, synthetic_scan
from .opo import OpoParams, linearize, spectral_covariance, steady_state
from .quadratures import CriteriaReport, Moments, SpectralCovariance, criteria_from_moments, criteria_report

__all__ = [
    "CavityParams", "CriteriaReport", "ModelError", "Moments", "OpoParams", "ParameterError",
    "SigmaScanData", "SpectralCovariance", "TricolorError", "criteria_from_moments",
    "criteria_report", "fit_parameters", "linearize", "measured_noise", "noise_weights",
    "predict_sigma_scan", "scan_curve", "spectral_covariance", "steady_state", "synthetic_scan",
]

"""Noise spectroscopy with stochastic quantum Zeno measurements.

Simulate a two-level probe under stochastic driving and repeated projective
measurements, estimate decoherence functions from survival statistics and
invert a filter bank to reconstruct the noise power spectral density.
"""
__version__ = "0.1.0"

from .errors import DomainError, EstimationError, NumericalError, SQZError, ValidationError
from .schedule import MeasurementSchedule
from .noise import (NoiseTrajectory, SpectralDensitySpec, autocorrelation_from_psd,
                    autocorrelation_quadrature, psd_eval, sample_trajectory)
from .control import (ControlPulse, FilterBank, FilterFunction, PiecewiseAveragedControl,
                      control_fourier, cross_term, design_filter_bank, filter_function,
                      frequency_grid, piecewise_average)
from .probe import (AnalogReadout, BinaryReadout, ProbeConfig, SurvivalResult, readout,
                    run_zeno_sequence)
from .estimators import (CampaignRecord, ChiEstimate, chi2_analog, chi2_binary, chik_analog,
                         ergodicity_stats, predicted_chi2)
from .reconstruction import gramian, reconstruct, relative_l2, transformed_filters

__all__ = [
    "AnalogReadout", "BinaryReadout", "CampaignRecord", "ChiEstimate", "ControlPulse",
    "DomainError", "EstimationError", "FilterBank", "FilterFunction", "MeasurementSchedule",
    "NoiseTrajectory", "NumericalError", "PiecewiseAveragedControl", "ProbeConfig", "SQZError",
    "SpectralDensitySpec", "SurvivalResult", "ValidationError", "autocorrelation_from_psd",
    "autocorrelation_quadrature", "chi2_analog", "chi2_binary", "chik_analog", "control_fourier",
    "cross_term", "design_filter_bank", "ergodicity_stats", "filter_function", "frequency_grid",
    "gramian", "piecewise_average", "predicted_chi2", "psd_eval", "readout", "reconstruct",
    "relative_l2", "run_zeno_sequence", "sample_trajectory", "transformed_filters",
]

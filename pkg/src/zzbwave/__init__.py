"""Ranging waveform design by Ziv-Zakai bound minimization over the ACF."""

from .bank import BankEntry, Selection, WaveformBank, build_bank, crossover_snr, select_waveform
from .io import WaveformFile, load_waveform, save_waveform
from .optimizer import ArmijoConfig, DesignConfig, DesignResult, design_waveform
from .projection import ProjectionConfig, dykstra_project, is_feasible
from .simulator import SimConfig, SimResult, error_cdf_report, monte_carlo_mse, monte_carlo_sweep
from .snr import SnrValue
from .spectrum import AcfVector, Grid, Spectrum, crb, dct_forward, make_sinc_acf, make_single_tone_acf, rms_bandwidth
from .zzb import zzb_gradient, zzb_hessian_diag, zzb_objective

__version__ = "0.1.0"

__all__ = [
    "AcfVector",
    "ArmijoConfig",
    "BankEntry",
    "DesignConfig",
    "DesignResult",
    "Grid",
    "ProjectionConfig",
    "Selection",
    "SimConfig",
    "SimResult",
    "SnrValue",
    "Spectrum",
    "WaveformBank",
    "WaveformFile",
    "build_bank",
    "crb",
    "crossover_snr",
    "dct_forward",
    "design_waveform",
    "dykstra_project",
    "error_cdf_report",
    "is_feasible",
    "load_waveform",
    "make_sinc_acf",
    "make_single_tone_acf",
    "monte_carlo_mse",
    "monte_carlo_sweep",
    "rms_bandwidth",
    "save_waveform",
    "select_waveform",
    "zzb_gradient",
    "zzb_hessian_diag",
    "zzb_objective",
]

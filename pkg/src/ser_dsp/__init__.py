"""
Simulation and DSP for single-ended coherent optical receivers.

Modules
-------
waveform
    QAM symbols and RRC pulse shaping.
channel
    Chromatic dispersion and ASE noise.
frontend
    Square-law detection, O/E responses and bandwidth limits.
reconstruct
    Field recovery from photocurrents (DFR, CIC, GD).
dynamics
    Error dynamics of iterative cancellation as a quadratic map.
calibration
    LMS identification of transmitter and receiver responses.
rxdsp
    Receiver chain, metrics and closed-form references.
experiments
    Configuration-driven sweeps and presets.
"""

from .channel import ChannelConfig, add_ase, apply_cd, compensate_cd
from .frontend import FrontEndConfig, PhotocurrentPair, detect, set_lospr
from .reconstruct import ClipSpec, ClipTarget, Method, cic, dfr, gd, mult_count, raw_passthrough
from .rxdsp import MetricReport, rx_chain
from .waveform import QamFormat, Waveform, gen_qam_symbols, rrc_shape

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig",
    "ClipSpec",
    "ClipTarget",
    "FrontEndConfig",
    "Method",
    "MetricReport",
    "PhotocurrentPair",
    "QamFormat",
    "Waveform",
    "add_ase",
    "apply_cd",
    "cic",
    "compensate_cd",
    "detect",
    "dfr",
    "gd",
    "gen_qam_symbols",
    "mult_count",
    "raw_passthrough",
    "rrc_shape",
    "rx_chain",
    "set_lospr",
]

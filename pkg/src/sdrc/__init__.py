"""Spectral-dynamics reservoir computing simulator and benchmark harness."""

from .nodes import (
    DiodeParams,
    FilterSpec,
    NodeSpec,
    design_bandpass,
    emulation_pool,
    envelope_diode,
    envelope_rms,
    extract_spectral_states,
    extract_virtual_states,
    filter_signal,
    hardware_preset_nodes,
)
from .readout import ReadoutModel, SplitSpec, predict, split, train_ridge
from .reservoir import (
    DetectorResponse,
    ModeSpec,
    ReservoirConfig,
    build_mode_table,
    delay_line_reference,
    fmr_frequency,
    simulate,
)
from .signals import PulseParams, SampledSignal, modulate_pulse_train, power_spectrum, resample
from .states import StateMatrix
from .tasks import (
    TaskDataset,
    capacity,
    classify_stream,
    gen_classification_stream,
    gen_narma2,
    gen_parity,
    nmse,
)

__version__ = "0.1.0"

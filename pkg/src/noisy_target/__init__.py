"""Desk-scale speech-enhancement lab comparing clean-, noise- and noisy-target training."""

from .metrics import aggregate, log_spectral_distance, si_sdr, si_sdr_improvement
from .mixer import Strategy, TrainingPair, fit_length, gain_for_snr, make_pair, mix_at_snr, swap_noise_augment
from .model import AdamState, MaskNet, MaskNetConfig, adam_step, backward, enhance, forward, init, loss
from .signal import SynthSpec, Waveform, mean_power, read_wav, synth, write_wav
from .stft import Mask, Spectrogram, StftParams, apply_mask, istft, istft_adjoint, log_magnitude, stft

__version__ = "0.1.0"

"""Cough-audio tuberculosis screening: descriptors, classifiers and grouped evaluation.

Modules
-------
audio_io : WAV decoding, polyphase resampling, dataset manifest
dsp : framing, windows, one-sided FFT spectra
lld : temporal, spectral, log-mel and MFCC descriptors
summarize : mean/std/skewness/kurtosis per descriptor
tabular : metadata encoding, imputation, scaling, fusion
models : logistic regression, MLP, random forest, AdaBoost
evaluation : stratified grouped k-fold, AUC, nested tuning, reports
features, config, synth, cli : pipeline wiring
"""

from .audio_io import AudioClip, decode_wav, load_manifest, resample
from .dsp import FrameConfig, fft_magnitude, frame_signal, make_window
from .evaluation import aggregate_by_participant, auc, run_experiment, stratified_group_kfold
from .lld import extract_lld_matrix, log_mel_spectrogram, mfcc
from .summarize import summarize_clip

__version__ = "0.1.0"

"""Synthetic multichannel EEG generator.

Stand-in for real recordings: per-subject mixing of 1/f-shaped noise
sources, plus a fixed damped-sinusoid evoked template injected into
target-class trials through a fixed spatial pattern. The generator is the
only place epochs are cut; every downstream transform sees fixed windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .signal_core import Dataset, Trial

__all__ = ["SyntheticSpec", "gen_synthetic"]

_EVOKED_FREQ_HZ = 10.0  # template carrier, kept inside common EEG pass bands
_EVOKED_GAIN = 3.0      # template RMS multiplier at evoked_snr = 1
_MIX_CROSS = 1.0        # cross-channel mixing strength
_NOISE_ALPHA = 1.25     # spectral amplitude slope: |X(f)| ~ 1/f^alpha
_SOURCE_FRAC = 0.5      # brain sources per channel (rank of shared noise)
_SENSOR_NOISE = 0.07    # independent white sensor noise std per channel


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and strength parameters of a generated dataset."""

    n_subjects: int = 8
    trials_per_subject_per_class: int = 100
    n_channels: int = 16
    fs: float = 128.0
    epoch_seconds: float = 1.0
    evoked_snr: float = 1.0
    subject_variability: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if min(self.n_subjects, self.trials_per_subject_per_class, self.n_channels) < 1:
            raise ConfigError("synthetic spec counts must all be >= 1")
        if not self.fs > 0 or not self.epoch_seconds > 0:
            raise ConfigError("fs and epoch_seconds must be positive")
        if self.evoked_snr < 0 or self.subject_variability < 0:
            raise ConfigError("evoked_snr and subject_variability must be >= 0")


def _pink_noise(rng, shape, n_samples):
    """1/f-amplitude-shaped Gaussian noise, unit std per signal."""
    white = rng.standard_normal(shape + (n_samples,))
    spectrum = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n_samples)
    freqs[0] = freqs[1]
    spectrum *= freqs ** -_NOISE_ALPHA
    x = np.fft.irfft(spectrum, n=n_samples, axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def gen_synthetic(spec, seed=None):
    """Generate a dataset from a spec, deterministic in ``seed``.

    Subjects share one base channel-mixing matrix, individually perturbed
    by ``subject_variability``. Target-class (label 1) trials carry a
    damped 10 Hz sinusoid through a fixed spatial pattern, scaled by
    ``evoked_snr``. Data is stored as float32, matching the on-disk
    container precision.
    """
    if seed is None:
        seed = spec.seed
    rng = np.random.default_rng([int(seed), 0x5EED])
    c = spec.n_channels
    s = int(round(spec.fs * spec.epoch_seconds))
    n_per = spec.trials_per_subject_per_class

    n_src = max(1, int(round(_SOURCE_FRAC * c)))
    base_mix = _MIX_CROSS * rng.standard_normal((c, n_src)) / np.sqrt(n_src)
    pattern = rng.standard_normal(c)
    pattern /= np.linalg.norm(pattern)
    t = np.arange(s) / spec.fs
    template = np.exp(-t / (0.4 * spec.epoch_seconds)) * np.sin(
        2.0 * np.pi * _EVOKED_FREQ_HZ * t
    )
    template /= np.sqrt(np.mean(template**2))
    evoked = spec.evoked_snr * _EVOKED_GAIN * np.outer(pattern, template)

    trials = []
    for subject in range(spec.n_subjects):
        mix = base_mix + spec.subject_variability * rng.standard_normal((c, n_src)) / np.sqrt(n_src)
        for label in (0, 1):
            sources = _pink_noise(rng, (n_per, n_src), s)
            data = np.einsum("cd,nds->ncs", mix, sources)
            data += _SENSOR_NOISE * rng.standard_normal(data.shape)
            if label == 1:
                data = data + evoked
            for i in range(n_per):
                trials.append(
                    Trial(
                        data=data[i].astype(np.float32),
                        fs=spec.fs,
                        label=label,
                        subject=subject,
                    )
                )
    return Dataset(
        trials=tuple(trials),
        channel_names=tuple(f"ch{i:02d}" for i in range(c)),
        class_names=("nontarget", "target"),
        name="synthetic",
    )

"""EEG data model and per-trial preprocessing transforms.

All transforms are pure: they never mutate their inputs and return new
``Trial``/``Dataset`` values. Trials are epoched segments of shape
(channels, samples); continuous-recording processing is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import ConfigError, DegenerateChannelError

__all__ = [
    "Trial",
    "Dataset",
    "PreprocessConfig",
    "bandpass",
    "downsample",
    "zscore",
    "clip",
    "rereference_average",
    "rereference_channel",
    "preprocess",
    "channel_std_stats",
]


def _freeze(a):
    a = np.asarray(a)
    a = a.copy() if a.flags.writeable or a.base is not None else a
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Trial:
    """One epoched multichannel EEG segment.

    Parameters
    ----------
    data : (n_channels, n_samples) ndarray
        Signal values; units are arbitrary but consistent within a dataset.
    fs : float
        Sampling rate in Hz.
    label : int
        Class index, >= 0.
    subject : int
        Subject identifier.
    """

    data: np.ndarray
    fs: float
    label: int
    subject: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.float32:  # keep f32 as stored on disk, promote the rest
            data = data.astype(np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ConfigError(f"trial data must be (channels, samples), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigError("trial data contains non-finite values")
        if not self.fs > 0:
            raise ConfigError(f"sampling rate must be positive, got {self.fs}")
        if self.label < 0:
            raise ConfigError(f"label must be >= 0, got {self.label}")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def with_data(self, data):
        """Copy of this trial with new sample values (same metadata)."""
        return replace(self, data=data)


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of trials sharing shape and sampling rate."""

    trials: tuple
    channel_names: tuple
    class_names: tuple
    name: str = "dataset"

    def __post_init__(self):
        trials = tuple(self.trials)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if trials:
            c, s, fs = trials[0].n_channels, trials[0].n_samples, trials[0].fs
            for i, t in enumerate(trials):
                if (t.n_channels, t.n_samples, t.fs) != (c, s, fs):
                    raise ConfigError(f"trial {i} shape/fs differs from trial 0")
                if t.label >= len(self.class_names):
                    raise ConfigError(f"trial {i} label {t.label} out of range")
            if len(self.channel_names) != c:
                raise ConfigError("channel_names length does not match trial channels")

    def __len__(self):
        return len(self.trials)

    @property
    def fs(self):
        return self.trials[0].fs

    @property
    def n_channels(self):
        return len(self.channel_names)

    @property
    def n_samples(self):
        return self.trials[0].n_samples

    def subjects(self):
        """Sorted unique subject ids."""
        return sorted({t.subject for t in self.trials})

    def labels(self):
        return np.array([t.label for t in self.trials], dtype=int)

    def stack(self):
        """All trial data as one (n_trials, n_channels, n_samples) array."""
        return np.stack([t.data for t in self.trials])

    def subset(self, indices):
        return replace(self, trials=tuple(self.trials[i] for i in indices))

    def for_subjects(self, subjects):
        keep = set(subjects)
        return replace(self, trials=tuple(t for t in self.trials if t.subject in keep))

    def with_trials(self, trials):
        return replace(self, trials=tuple(trials))


@dataclass(frozen=True)
class PreprocessConfig:
    """Preprocessing recipe: downsample -> band-pass -> clip -> z-score."""

    target_fs: float
    band_low: float
    band_high: float
    clip_bounds: tuple | None = None
    apply_zscore: bool = True

    def __post_init__(self):
        if not (0 < self.band_low < self.band_high < self.target_fs / 2):
            raise ConfigError(
                f"band [{self.band_low}, {self.band_high}] Hz invalid for "
                f"target_fs {self.target_fs} Hz"
            )
        if self.clip_bounds is not None:
            lo, hi = self.clip_bounds
            if not lo < hi:
                raise ConfigError(f"clip bounds require lo < hi, got ({lo}, {hi})")
            object.__setattr__(self, "clip_bounds", (float(lo), float(hi)))


# --------------------------------------------------------------------------
# array-level kernels (operate on (..., samples) arrays, used by both the
# per-trial ops and the vectorized dataset path)

def _bandpass_array(x, fs, low, high, order=4):
    if not (0 < low < high < fs / 2):
        raise ConfigError(f"band [{low}, {high}] Hz outside (0, fs/2) for fs={fs}")
    sos = butter(order, [low, high], btype="band", fs=fs, output="sos")
    return sosfiltfilt(sos, x, axis=-1)


def _downsample_array(x, fs, target_fs):
    ratio = fs / target_fs
    k = int(round(ratio))
    if not target_fs > 0 or abs(ratio - k) > 1e-9:
        raise ConfigError(f"fs {fs} is not an integer multiple of target_fs {target_fs}")
    if k == 1:
        return x
    # anti-alias low-pass before decimation, zero-phase
    sos = butter(8, 0.4 * target_fs, btype="low", fs=fs, output="sos")
    y = sosfiltfilt(sos, x, axis=-1)
    n_out = (x.shape[-1] * int(target_fs)) // int(fs)
    return y[..., ::k][..., :n_out]


def _zscore_array(x):
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    bad = np.nonzero(std == 0)
    if bad[0].size:
        idx = tuple(int(b[0]) for b in bad)
        raise DegenerateChannelError(f"zero-variance channel at index {idx}")
    return (x - mean) / std


# --------------------------------------------------------------------------
# per-trial operations

def bandpass(trial, low, high):
    """Zero-phase 4th-order Butterworth band-pass over (low, high) Hz."""
    return trial.with_data(_bandpass_array(trial.data, trial.fs, low, high))


def downsample(trial, target_fs):
    """Anti-aliased decimation to ``target_fs`` (must divide ``trial.fs``)."""
    data = _downsample_array(trial.data, trial.fs, target_fs)
    return replace(trial, data=data, fs=float(target_fs))


def zscore(trial):
    """Standardize each channel to mean 0, population std 1."""
    return trial.with_data(_zscore_array(trial.data))


def clip(trial, lo, hi):
    """Truncate every sample into [lo, hi]."""
    if not lo < hi:
        raise ConfigError(f"clip requires lo < hi, got ({lo}, {hi})")
    return trial.with_data(np.clip(trial.data, lo, hi))


def rereference_average(trial):
    """Subtract the instantaneous channel mean from every channel."""
    if trial.n_channels < 2:
        raise ConfigError("average re-referencing needs at least 2 channels")
    return trial.with_data(trial.data - trial.data.mean(axis=0, keepdims=True))


def rereference_channel(trial, ref_idx):
    """Re-express every channel relative to channel ``ref_idx``."""
    if not 0 <= ref_idx < trial.n_channels:
        raise IndexError(f"reference channel {ref_idx} out of range for "
                         f"{trial.n_channels} channels")
    return trial.with_data(trial.data - trial.data[ref_idx])


def preprocess(dataset, cfg):
    """Apply the full recipe to every trial of a dataset.

    Order is fixed: downsample -> band-pass -> clip (if configured) ->
    z-score (if enabled). Runs vectorized over the stacked trial array.
    """
    if not dataset.trials:
        raise ConfigError("cannot preprocess an empty dataset")
    fs = dataset.fs
    x = dataset.stack().astype(np.float64)
    try:
        x = _downsample_array(x, fs, cfg.target_fs)
        x = _bandpass_array(x, cfg.target_fs, cfg.band_low, cfg.band_high)
        if cfg.clip_bounds is not None:
            x = np.clip(x, *cfg.clip_bounds)
        if cfg.apply_zscore:
            x = _zscore_array(x)
    except DegenerateChannelError as err:
        raise DegenerateChannelError(f"{err} (trial, channel)") from err
    trials = tuple(
        replace(t, data=x[i], fs=float(cfg.target_fs))
        for i, t in enumerate(dataset.trials)
    )
    return dataset.with_trials(trials)


def channel_std_stats(trials):
    """Mean over trials and channels of the per-channel population std."""
    trials = list(trials)
    if not trials:
        raise ConfigError("channel_std_stats needs at least one trial")
    stds = np.stack([t.data.std(axis=-1) for t in trials])
    return float(stds.mean())

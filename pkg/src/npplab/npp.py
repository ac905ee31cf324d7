"""Narrow-period-pulse backdoor keys: sampling, injection, amplitude scaling.

A key is a periodic rectangular pulse train described by a period ``T``
(seconds), duty cycle ``d`` (pulse duration / period), amplitude ``a``
(signal units) and phase ``phi`` (seconds). Keys are injected additively
into raw trials over a channel subset.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .signal_core import Trial

__all__ = [
    "NppParams",
    "ChannelMask",
    "sample_npp",
    "apply_key",
    "draw_random_phase",
    "amplitude_for_ratio",
]


@dataclass(frozen=True)
class NppParams:
    """Pulse-train description: period, duty cycle, amplitude, phase."""

    period_T: float
    duty_d: float
    amplitude_a: float
    phase_phi: float = 0.0

    def __post_init__(self):
        if not self.period_T > 0:
            raise ConfigError(f"period must be positive, got {self.period_T}")
        if not 0 <= self.duty_d <= 1:
            raise ConfigError(f"duty cycle must be in [0, 1], got {self.duty_d}")
        if not 0 <= self.phase_phi < self.period_T:
            raise ConfigError(
                f"phase {self.phase_phi} must be in [0, {self.period_T})"
            )


@dataclass(frozen=True)
class ChannelMask:
    """Nonempty set of channel indices that receive the key."""

    included: frozenset

    def __post_init__(self):
        included = frozenset(int(i) for i in self.included)
        if not included:
            raise ConfigError("channel mask must be nonempty")
        if min(included) < 0:
            raise ConfigError("channel indices must be nonnegative")
        object.__setattr__(self, "included", included)

    def indices(self):
        return sorted(self.included)

    def validate(self, n_channels):
        if max(self.included) >= n_channels:
            raise IndexError(
                f"channel mask {sorted(self.included)} out of range for "
                f"{n_channels} channels"
            )


def sample_npp(p, fs, n):
    """Sample the continuous pulse train at rate ``fs`` for ``n`` points.

    Entry ``i`` equals ``a`` when ``(i/fs - phi) mod T`` falls inside
    ``[0, d*T)`` and 0 otherwise. Sampling the continuous definition keeps
    the long-run duty cycle exact even when ``T * fs`` is not an integer.
    """
    if not fs > 0:
        raise ConfigError(f"sampling rate must be positive, got {fs}")
    if n < 0:
        raise ConfigError(f"sample count must be >= 0, got {n}")
    t = np.arange(n, dtype=np.float64) / fs
    on = np.mod(t - p.phase_phi, p.period_T) < p.duty_d * p.period_T
    return np.where(on, float(p.amplitude_a), 0.0)


def apply_key(trial, p, mask):
    """Add the sampled key to the masked channels of a trial.

    The identical waveform goes onto every masked channel; all other
    channels are returned bit-for-bit unchanged.
    """
    mask.validate(trial.n_channels)
    waveform = sample_npp(p, trial.fs, trial.n_samples)
    data = np.array(trial.data, dtype=np.float64)
    data[mask.indices(), :] += waveform
    return trial.with_data(data)


def draw_random_phase(p, rng, max_frac=0.8):
    """Return a copy of ``p`` with phase drawn uniformly from [0, max_frac*T)."""
    if not 0 <= max_frac <= 1:
        raise ConfigError(f"max_frac must be in [0, 1], got {max_frac}")
    phi = float(rng.uniform(0.0, max_frac * p.period_T)) if max_frac > 0 else 0.0
    return replace(p, phase_phi=phi)


def amplitude_for_ratio(mean_std, ratio):
    """Key amplitude for an amplitude ratio relative to the mean channel std."""
    if mean_std < 0 or ratio < 0:
        raise ConfigError("mean_std and ratio must be nonnegative")
    return float(ratio * mean_std)

"""Poisoning-set construction and ACC/ASR evaluation.

The attacker forges poisoning trials by adding an NPP key to raw trials
from a pool they control and relabeling them to the target class. The
poisoned model is then scored by its clean test accuracy (ACC) and by the
attack success rate (ASR): the fraction of true non-target test trials
classified as the target class once the key is added.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .models import predict
from .npp import ChannelMask, NppParams, apply_key, draw_random_phase
from .signal_core import preprocess

__all__ = [
    "PoisonConfig",
    "AttackReport",
    "channel_subset",
    "forge_poison_set",
    "poison_merge",
    "eval_acc",
    "eval_asr",
]

# domain separators for RNG streams derived from PoisonConfig.seed
_SUBSET_STREAM = 0x5B5E7
_TEST_PHASE_STREAM = 0xA5A5


@dataclass(frozen=True)
class PoisonConfig:
    """Attacker-side description of one poisoning campaign."""

    target_class: int
    n_poison: int
    npp: NppParams
    channel_fraction: float = 1.0
    random_phase: bool = True
    max_phase_frac: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n_poison < 0:
            raise ConfigError(f"n_poison must be >= 0, got {self.n_poison}")
        if not 0 < self.channel_fraction <= 1:
            raise ConfigError(
                f"channel_fraction must be in (0, 1], got {self.channel_fraction}"
            )
        if not 0 <= self.max_phase_frac <= 1:
            raise ConfigError(
                f"max_phase_frac must be in [0, 1], got {self.max_phase_frac}"
            )


@dataclass(frozen=True)
class AttackReport:
    """ACC/ASR pair with the test-set sizes behind them."""

    acc: float
    asr: float
    n_test_clean: int
    n_test_nontarget: int

    def __post_init__(self):
        if not (0 <= self.acc <= 1 and 0 <= self.asr <= 1):
            raise ConfigError("acc and asr must be fractions in [0, 1]")


def channel_subset(cfg, n_channels):
    """Channel mask for a campaign: drawn once, deterministic in cfg.seed.

    Size is ``ceil(channel_fraction * n_channels)``. Forging and ASR
    evaluation both call this, so train- and test-time injections always
    hit the same channels.
    """
    size = math.ceil(cfg.channel_fraction * n_channels)
    rng = np.random.default_rng([cfg.seed, _SUBSET_STREAM])
    picked = rng.choice(n_channels, size=size, replace=False)
    return ChannelMask(included=frozenset(int(i) for i in picked))


def _keyed_trial(trial, cfg, npp, mask, rng):
    if cfg.random_phase:
        npp = draw_random_phase(npp, rng, cfg.max_phase_frac)
    return apply_key(trial, npp, mask)


def forge_poison_set(pool, cfg, rng):
    """Sample, key, and relabel poisoning trials from the attacker's pool.

    Trials are drawn without replacement; each gets the key (fresh random
    phase per trial when enabled) and its label forced to the target class.
    """
    if cfg.n_poison > len(pool):
        raise ConfigError(
            f"n_poison {cfg.n_poison} exceeds pool size {len(pool)}"
        )
    if cfg.target_class >= len(pool.class_names):
        raise ConfigError(f"target class {cfg.target_class} out of range")
    mask = channel_subset(cfg, pool.n_channels)
    picked = rng.choice(len(pool), size=cfg.n_poison, replace=False)
    poison = []
    for i in picked:
        keyed = _keyed_trial(pool.trials[int(i)], cfg, cfg.npp, mask, rng)
        poison.append(replace(keyed, label=cfg.target_class))
    return poison


def poison_merge(train, poison, rng=None):
    """Union of the training set and the poison trials.

    When ``rng`` is given the combined order is shuffled deterministically;
    otherwise poison trials are appended in order.
    """
    if poison:
        t0 = train.trials[0] if train.trials else poison[0]
        for i, p in enumerate(poison):
            if (p.n_channels, p.n_samples, p.fs) != (t0.n_channels, t0.n_samples, t0.fs):
                raise ConfigError(f"poison trial {i} shape/fs mismatch with train set")
    merged = list(train.trials) + list(poison)
    if rng is not None:
        order = rng.permutation(len(merged))
        merged = [merged[int(i)] for i in order]
    return train.with_trials(merged)


def eval_acc(pipeline, test_clean):
    """Fraction of clean, preprocessed test trials classified correctly."""
    if not test_clean.trials:
        raise ConfigError("empty test set")
    hits = sum(predict(pipeline, t)[0] == t.label for t in test_clean.trials)
    return hits / len(test_clean)


def eval_asr(pipeline, test_raw, cfg, preprocess_cfg, rng=None, test_npp=None):
    """Attack success rate on raw test trials.

    Keys every true non-target trial (fresh random phase per trial when
    enabled), preprocesses, and returns the fraction predicted as the
    target class. ``test_npp`` overrides the key parameters at test time
    (train/test key mismatch experiments); channel subset and amplitude
    semantics come from ``cfg``. Never mutates the test dataset.
    """
    nontarget = [t for t in test_raw.trials if t.label != cfg.target_class]
    if not nontarget:
        raise ConfigError("test set has no non-target trials")
    npp = cfg.npp if test_npp is None else test_npp
    mask = channel_subset(cfg, test_raw.n_channels)
    if rng is None:
        rng = np.random.default_rng([cfg.seed, _TEST_PHASE_STREAM])
    keyed = [_keyed_trial(t, cfg, npp, mask, rng) for t in nontarget]
    poisoned = preprocess(test_raw.with_trials(keyed), preprocess_cfg)
    hits = sum(predict(pipeline, t)[0] == cfg.target_class for t in poisoned.trials)
    return hits / len(nontarget)

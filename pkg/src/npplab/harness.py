"""Experiment orchestration: LOSO cross-validation, balancing, sweeps.

Seeding scheme (documented, stable): every random stream is a
``numpy.random.default_rng`` keyed by an integer list
``[master_seed, repeat, fold, stream]``, so per-fold results are
independent of scheduling and thread count.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import dataio, synth
from .attack import PoisonConfig, eval_acc, eval_asr, forge_poison_set, poison_merge
from .errors import ConfigError
from .models import TrainOptions, fit_pipeline
from .npp import NppParams, amplitude_for_ratio
from .signal_core import PreprocessConfig, channel_std_stats, preprocess
from .synth import SyntheticSpec, gen_synthetic

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SplitPlan",
    "experiment_plan",
    "loso_plan",
    "undersample",
    "split_train_val",
    "run_single",
    "load_config_dataset",
    "run_experiment",
    "run_sweep",
    "config_to_dict",
    "config_from_dict",
    "config_fingerprint",
    "summarize",
]

SWEEP_AXES = ("poison_ratio", "amplitude_ratio", "period_duty", "channel_fraction")

# stream ids within one fold
_S_UNDERSAMPLE = 1
_S_FORGE = 2
_S_MERGE = 3
_S_SPLIT = 4
_S_POISON_SEED = 5
_S_EVAL = 6
_S_PICK_SUBJECT = 7


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; NPP amplitudes are given as ratios
    of the mean channel-wise std of the attacker's raw pool."""

    preprocess: PreprocessConfig
    npp: NppParams  # amplitude_a is an amplitude RATIO here
    synthetic: SyntheticSpec | None = None
    dataset_path: str | None = None
    model_kind: str = "csp_logvar"
    n_pairs: int = 3
    n_filters: int = 4
    decim: int = 8
    train: TrainOptions = TrainOptions()
    target_class: int = 1
    channel_fraction: float = 1.0
    random_phase: bool = True
    max_phase_frac: float = 0.8
    poison_ratio: float | None = 0.1
    n_poison: int | None = None  # used when poison_ratio is None; None = whole pool
    val_fraction: float = 0.2
    repeats: int = 1
    master_seed: int = 0
    # test-time key overrides (train/test mismatch experiments)
    test_npp: NppParams | None = None
    test_random_phase: bool | None = None

    def __post_init__(self):
        if (self.synthetic is None) == (self.dataset_path is None):
            raise ConfigError("exactly one of synthetic/dataset_path must be set")
        if self.poison_ratio is not None and not 0 <= self.poison_ratio <= 1:
            raise ConfigError(f"poison_ratio must be in [0, 1], got {self.poison_ratio}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.model_kind not in ("csp_logvar", "xdawn_flat"):
            raise ConfigError(f"unknown model kind {self.model_kind!r}")


@dataclass(frozen=True)
class ResultRow:
    """One (repeat, fold) outcome."""

    repeat: int
    poison_subject: int
    test_subject: int
    acc: float
    asr: float
    fingerprint: str


@dataclass(frozen=True)
class SplitPlan:
    """LOSO folds over every subject except the poisoning one."""

    poison_subject: int
    folds: tuple  # of (test_subject, tuple(train_subjects))

    def __post_init__(self):
        for test_subject, train_subjects in self.folds:
            if self.poison_subject == test_subject or self.poison_subject in train_subjects:
                raise ConfigError("poison subject leaked into a fold")


def _rng(*key):
    return np.random.default_rng([int(k) for k in key])


def _seed_int(*key):
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def loso_plan(dataset, poison_subject):
    """Leave-one-subject-out plan excluding the poisoning subject."""
    subjects = dataset.subjects()
    if len(subjects) < 3:
        raise ConfigError("LOSO planning needs at least 3 subjects")
    if poison_subject not in subjects:
        raise ConfigError(f"poison subject {poison_subject} not in dataset")
    rest = [s for s in subjects if s != poison_subject]
    folds = tuple(
        (test, tuple(s for s in rest if s != test)) for test in rest
    )
    return SplitPlan(poison_subject=poison_subject, folds=folds)


def undersample(train, rng):
    """Balance classes per subject by dropping majority-class trials."""
    labels = train.labels()
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise ConfigError("undersampling expects 2 classes in the training set")
    keep = []
    for subject in train.subjects():
        by_class = {
            c: [i for i, t in enumerate(train.trials)
                if t.subject == subject and t.label == c]
            for c in classes
        }
        m = min(len(v) for v in by_class.values())
        if m == 0:
            warnings.warn(f"subject {subject} has a single class; contributes 0 trials")
        for c in classes:
            idx = by_class[c]
            picked = rng.choice(len(idx), size=m, replace=False) if len(idx) > m \
                else np.arange(len(idx))
            keep.extend(idx[int(i)] for i in sorted(picked))
    return train.subset(sorted(keep))


def split_train_val(dataset, fraction, rng):
    """Class-stratified random partition into (train, val)."""
    if not 0 < fraction < 1:
        raise ConfigError(f"fraction must be in (0, 1), got {fraction}")
    labels = dataset.labels()
    train_idx, val_idx = [], []
    for c in sorted(set(labels)):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ConfigError(f"class {c} has fewer than 2 trials; cannot split")
        order = rng.permutation(idx.size)
        n_train = int(round(fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train_idx.extend(idx[order[:n_train]])
        val_idx.extend(idx[order[n_train:]])
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(val_idx))


def load_config_dataset(config):
    """Materialize the dataset a config points at."""
    if config.synthetic is not None:
        return gen_synthetic(config.synthetic)
    return dataio.load_dataset(config.dataset_path)


def run_single(dataset_raw, poison_subject, fold, config, fold_seed):
    """Execute one LOSO fold end to end, deterministic in ``fold_seed``.

    ``fold_seed`` is the (master_seed, repeat, fold_index) triple anchoring
    every random stream of this fold.
    """
    repeat = fold_seed[1]
    test_subject, train_subjects = fold
    test_raw = dataset_raw.for_subjects([test_subject])
    train_raw = dataset_raw.for_subjects(train_subjects)
    pool = dataset_raw.for_subjects([poison_subject])

    train_bal = undersample(train_raw, _rng(*fold_seed, _S_UNDERSAMPLE))

    mean_std = channel_std_stats(pool.trials)
    if config.poison_ratio is not None:
        n_poison = int(round(config.poison_ratio * len(train_bal)))
    elif config.n_poison is not None:
        n_poison = config.n_poison
    else:
        n_poison = len(pool)

    train_key = replace(
        config.npp,
        amplitude_a=amplitude_for_ratio(mean_std, config.npp.amplitude_a),
    )
    pcfg = PoisonConfig(
        target_class=config.target_class,
        n_poison=n_poison,
        npp=train_key,
        channel_fraction=config.channel_fraction,
        random_phase=config.random_phase,
        max_phase_frac=config.max_phase_frac,
        seed=_seed_int(*fold_seed, _S_POISON_SEED),
    )
    poison = forge_poison_set(pool, pcfg, _rng(*fold_seed, _S_FORGE))
    merged = poison_merge(train_bal, poison, _rng(*fold_seed, _S_MERGE))
    processed = preprocess(merged, config.preprocess)
    train_set, val_set = split_train_val(
        processed, 1.0 - config.val_fraction, _rng(*fold_seed, _S_SPLIT)
    )
    pipeline = fit_pipeline(
        train_set, val_set, config.model_kind, config.train,
        n_pairs=config.n_pairs, n_filters=config.n_filters, decim=config.decim,
    )

    acc = eval_acc(pipeline, preprocess(test_raw, config.preprocess))

    test_base = config.npp if config.test_npp is None else config.test_npp
    test_key = replace(
        test_base,
        amplitude_a=amplitude_for_ratio(mean_std, test_base.amplitude_a),
    )
    test_cfg = replace(
        pcfg,
        npp=test_key,
        random_phase=config.random_phase
        if config.test_random_phase is None else config.test_random_phase,
    )
    asr = eval_asr(
        pipeline, test_raw, test_cfg, config.preprocess,
        rng=_rng(*fold_seed, _S_EVAL),
    )
    return ResultRow(
        repeat=repeat,
        poison_subject=poison_subject,
        test_subject=test_subject,
        acc=acc,
        asr=asr,
        fingerprint=config_fingerprint(config),
    )


def summarize(rows):
    """Mean/std of ACC and ASR over result rows."""
    acc = np.array([r.acc for r in rows])
    asr = np.array([r.asr for r in rows])
    return {
        "acc_mean": float(acc.mean()),
        "acc_std": float(acc.std()),
        "asr_mean": float(asr.mean()),
        "asr_std": float(asr.std()),
        "n_rows": len(rows),
    }


def experiment_plan(config, dataset):
    """Per-repeat (repeat index, SplitPlan) pairs an experiment will run.

    The poisoning subject of repeat ``r`` is drawn from the stream keyed
    by (master_seed, r); exposing the plan lets callers audit subject
    isolation without re-running anything.
    """
    subjects = dataset.subjects()
    plans = []
    for r in range(config.repeats):
        pick = _rng(config.master_seed, r, 0, _S_PICK_SUBJECT)
        poison_subject = subjects[int(pick.integers(len(subjects)))]
        plans.append((r, loso_plan(dataset, poison_subject)))
    return plans


def run_experiment(config, threads=1, dataset=None):
    """Run repeats x LOSO folds; returns (rows, summary).

    Each repeat draws its poisoning subject from a per-repeat stream; the
    remaining subjects form the LOSO folds. Rows come back sorted by
    (repeat, fold) regardless of thread count.
    """
    if dataset is None:
        dataset = load_config_dataset(config)
    tasks = [
        (r, fi, plan.poison_subject, fold)
        for r, plan in experiment_plan(config, dataset)
        for fi, fold in enumerate(plan.folds)
    ]

    def _one(task):
        r, fi, poison_subject, fold = task
        return run_single(dataset, poison_subject, fold, config,
                          (config.master_seed, r, fi))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_one, tasks))
    else:
        rows = [_one(t) for t in tasks]
    return rows, summarize(rows)


def run_sweep(config, axis, values, threads=1, dataset=None):
    """Sweep one experiment axis; returns one summary record per cell.

    ``period_duty`` values are (T, d) pairs and expand into a full
    train x test grid; the other axes produce one record per value.
    The ``amplitude_ratio`` axis varies the TEST key amplitude, with the
    training amplitude fixed by the base config.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if dataset is None:
        dataset = load_config_dataset(config)

    records = []
    if axis == "period_duty":
        for period, duty in values:
            train_cfg = replace(
                config,
                npp=replace(config.npp, period_T=period, duty_d=duty, phase_phi=0.0),
            )
            for test_period, test_duty in values:
                cell = replace(
                    train_cfg,
                    test_npp=replace(
                        train_cfg.npp, period_T=test_period, duty_d=test_duty,
                        phase_phi=0.0,
                    ),
                )
                _, summary = run_experiment(cell, threads=threads, dataset=dataset)
                records.append(
                    {
                        "axis": axis,
                        "train_value": (period, duty),
                        "test_value": (test_period, test_duty),
                        **summary,
                    }
                )
        return records

    for v in values:
        if axis == "poison_ratio":
            cell = replace(config, poison_ratio=v)
        elif axis == "channel_fraction":
            cell = replace(config, channel_fraction=v)
        else:  # amplitude_ratio (test-time)
            base = config.npp if config.test_npp is None else config.test_npp
            cell = replace(config, test_npp=replace(base, amplitude_a=v))
        _, summary = run_experiment(cell, threads=threads, dataset=dataset)
        records.append({"axis": axis, "value": v, **summary})
    return records


# --------------------------------------------------------------------------
# config (de)serialization, schema_version 1; unknown keys are hard errors

def config_to_dict(config):
    d = asdict(config)
    d["schema_version"] = 1
    return d


def _take(d, allowed, context):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {sorted(unknown)}")


def _npp_from(d, context):
    if d is None:
        return None
    _take(d, ("period_T", "duty_d", "amplitude_a", "phase_phi"), context)
    return NppParams(**d)


def config_from_dict(d):
    """Parse a schema_version-1 config dict into an ExperimentConfig."""
    d = dict(d)
    version = d.pop("schema_version", None)
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version!r} (expected 1)")
    allowed = {f for f in ExperimentConfig.__dataclass_fields__}
    _take(d, allowed, "config")
    if "preprocess" not in d or "npp" not in d:
        raise ConfigError("config requires 'preprocess' and 'npp' sections")

    pp = dict(d.pop("preprocess"))
    _take(pp, ("target_fs", "band_low", "band_high", "clip_bounds", "apply_zscore"),
          "preprocess")
    if pp.get("clip_bounds") is not None:
        pp["clip_bounds"] = tuple(pp["clip_bounds"])
    preprocess_cfg = PreprocessConfig(**pp)

    npp = _npp_from(dict(d.pop("npp")), "npp")
    test_npp = d.pop("test_npp", None)
    if test_npp is not None:
        test_npp = _npp_from(dict(test_npp), "test_npp")

    synthetic = d.pop("synthetic", None)
    if synthetic is not None:
        syn = dict(synthetic)
        _take(syn, SyntheticSpec.__dataclass_fields__, "synthetic")
        synthetic = SyntheticSpec(**syn)

    train = d.pop("train", None)
    if train is not None:
        tr = dict(train)
        _take(tr, TrainOptions.__dataclass_fields__, "train")
        train = TrainOptions(**tr)
    else:
        train = TrainOptions()

    return ExperimentConfig(
        preprocess=preprocess_cfg, npp=npp, synthetic=synthetic,
        test_npp=test_npp, train=train, **d,
    )


def config_fingerprint(config):
    """Stable short hash of the serialized config."""
    blob = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]

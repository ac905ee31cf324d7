import json
from pathlib import Path

import numpy as np
import pytest

from npplab import (
    Dataset,
    ExperimentConfig,
    NppParams,
    PreprocessConfig,
    SyntheticSpec,
    Trial,
    gen_synthetic,
)

FIXTURE_PATH = Path(__file__).parent / "fixtures" / "fixture.json"


@pytest.fixture(scope="session")
def frozen():
    """Calibrated fixture parameters and thresholds (never recalibrated here)."""
    return json.loads(FIXTURE_PATH.read_text())


@pytest.fixture(scope="session")
def fixture_spec(frozen):
    return SyntheticSpec(**frozen["synthetic"])


@pytest.fixture(scope="session")
def fixture_preprocess(frozen):
    return PreprocessConfig(**frozen["preprocess"])


@pytest.fixture(scope="session")
def fixture_npp(frozen):
    return NppParams(**frozen["npp"])


@pytest.fixture(scope="session")
def fixture_dataset(fixture_spec):
    return gen_synthetic(fixture_spec)


@pytest.fixture(scope="session")
def fixture_config(frozen, fixture_spec, fixture_preprocess, fixture_npp):
    """Default attack configuration on the frozen fixture."""
    return ExperimentConfig(
        preprocess=fixture_preprocess,
        npp=fixture_npp,
        synthetic=fixture_spec,
        poison_ratio=0.10,
        repeats=1,
        master_seed=frozen["master_seed"],
    )


def make_trial(data, fs=128.0, label=0, subject=0):
    return Trial(data=np.asarray(data, dtype=float), fs=fs, label=label, subject=subject)


def make_dataset(trials, n_channels=None, n_classes=2, name="toy"):
    n_channels = n_channels if n_channels is not None else trials[0].n_channels
    return Dataset(
        trials=tuple(trials),
        channel_names=tuple(f"ch{i}" for i in range(n_channels)),
        class_names=tuple(f"class{i}" for i in range(n_classes)),
        name=name,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_spec(**overrides):
    """Small synthetic spec for fast harness/CLI tests."""
    base = dict(
        n_subjects=4,
        trials_per_subject_per_class=12,
        n_channels=6,
        fs=64.0,
        epoch_seconds=0.5,
        evoked_snr=1.0,
        subject_variability=0.3,
        seed=5,
    )
    base.update(overrides)
    return SyntheticSpec(**base)


def tiny_config(**overrides):
    base = dict(
        preprocess=PreprocessConfig(target_fs=64.0, band_low=4.0, band_high=20.0),
        npp=NppParams(period_T=0.125, duty_d=0.2, amplitude_a=1.0, phase_phi=0.0),
        synthetic=tiny_spec(),
        poison_ratio=0.10,
        repeats=1,
        master_seed=3,
        train=None,
    )
    base.update(overrides)
    if base["train"] is None:
        from npplab import TrainOptions

        base["train"] = TrainOptions(max_epochs=200, patience=30)
    return ExperimentConfig(**base)

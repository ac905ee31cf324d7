import numpy as np
import pytest

from npplab import (
    ConfigError,
    NppParams,
    PoisonConfig,
    PreprocessConfig,
    TrainOptions,
    channel_subset,
    eval_acc,
    eval_asr,
    fit_pipeline,
    forge_poison_set,
    poison_merge,
    predict,
    preprocess,
)
from npplab.models import LogRegModel, Pipeline, fit_csp

from conftest import make_dataset, make_trial

KEY = NppParams(period_T=0.25, duty_d=0.2, amplitude_a=1.0)


def toy_pool(rng, n_trials=20, n_channels=6, n_samples=32, label=0):
    trials = [make_trial(rng.standard_normal((n_channels, n_samples)), fs=64.0,
                         label=label, subject=i % 3)
              for i in range(n_trials)]
    return make_dataset(trials, n_channels=n_channels)


def zero_pool(n_trials=8, n_channels=4, n_samples=64):
    trials = [make_trial(np.zeros((n_channels, n_samples)), fs=64.0, label=0)
              for _ in range(n_trials)]
    return make_dataset(trials, n_channels=n_channels)


class TestChannelSubset:
    def test_full_fraction_covers_all(self):
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY)
        assert channel_subset(cfg, 6).included == frozenset(range(6))

    def test_size_is_ceiling(self):
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY,
                           channel_fraction=0.3)
        assert len(channel_subset(cfg, 10).included) == 3
        assert len(channel_subset(cfg, 16).included) == 5

    def test_deterministic_in_seed(self):
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY,
                           channel_fraction=0.5, seed=11)
        assert channel_subset(cfg, 16) == channel_subset(cfg, 16)
        other = PoisonConfig(target_class=1, n_poison=1, npp=KEY,
                             channel_fraction=0.5, seed=12)
        # different seeds should usually pick different subsets
        assert channel_subset(cfg, 16) != channel_subset(other, 16)

    def test_invalid_fraction_rejected(self):
        with pytest.raises(ConfigError):
            PoisonConfig(target_class=1, n_poison=1, npp=KEY, channel_fraction=0.0)
        with pytest.raises(ConfigError):
            PoisonConfig(target_class=1, n_poison=1, npp=KEY, channel_fraction=1.2)


class TestForgePoisonSet:
    def test_zero_poison_is_empty(self, rng):
        cfg = PoisonConfig(target_class=1, n_poison=0, npp=KEY)
        assert forge_poison_set(toy_pool(rng), cfg, rng) == []

    def test_relabeled_to_target(self, rng):
        cfg = PoisonConfig(target_class=1, n_poison=10, npp=KEY)
        poison = forge_poison_set(toy_pool(rng), cfg, rng)
        assert len(poison) == 10
        assert all(t.label == 1 for t in poison)

    def test_zero_amplitude_only_relabels(self, rng):
        silent = NppParams(period_T=0.25, duty_d=0.2, amplitude_a=0.0)
        pool = toy_pool(rng, n_trials=5)
        cfg = PoisonConfig(target_class=1, n_poison=5, npp=silent, seed=3)
        poison = forge_poison_set(pool, cfg, rng)
        originals = {t.data.tobytes() for t in pool.trials}
        assert {t.data.tobytes() for t in poison} == originals

    def test_without_replacement(self, rng):
        pool = toy_pool(rng, n_trials=6)
        silent = NppParams(period_T=0.25, duty_d=0.2, amplitude_a=0.0)
        cfg = PoisonConfig(target_class=1, n_poison=6, npp=silent)
        poison = forge_poison_set(pool, cfg, rng)
        assert len({t.data.tobytes() for t in poison}) == 6

    def test_fresh_phase_per_trial(self, rng):
        # zero pool: the forged data is exactly the keyed waveform, so
        # differing rows mean differing phases
        cfg = PoisonConfig(target_class=1, n_poison=8, npp=KEY, seed=1)
        poison = forge_poison_set(zero_pool(), cfg, rng)
        waveforms = {t.data[0].tobytes() for t in poison}
        assert len(waveforms) > 1
        for t in poison:
            pulse = np.flatnonzero(t.data[0])
            assert pulse.size > 0
            # max_phase_frac 0.8 with duty 0.2 keeps the first pulse inside
            # the first period
            assert pulse[0] < KEY.period_T * 64.0

    def test_fixed_phase_identical_waveforms(self, rng):
        cfg = PoisonConfig(target_class=1, n_poison=8, npp=KEY,
                           random_phase=False)
        poison = forge_poison_set(zero_pool(), cfg, rng)
        assert len({t.data.tobytes() for t in poison}) == 1

    def test_channel_fraction_limits_injection(self, rng):
        cfg = PoisonConfig(target_class=1, n_poison=4, npp=KEY,
                           channel_fraction=0.5, seed=2)
        poison = forge_poison_set(zero_pool(), cfg, rng)
        mask = channel_subset(cfg, 4)
        assert len(mask.included) == 2
        for t in poison:
            touched = {c for c in range(4) if np.any(t.data[c] != 0)}
            assert touched == mask.included

    def test_oversized_request_rejected(self, rng):
        cfg = PoisonConfig(target_class=1, n_poison=99, npp=KEY)
        with pytest.raises(ConfigError):
            forge_poison_set(toy_pool(rng), cfg, rng)

    def test_bad_target_class_rejected(self, rng):
        cfg = PoisonConfig(target_class=5, n_poison=1, npp=KEY)
        with pytest.raises(ConfigError):
            forge_poison_set(toy_pool(rng), cfg, rng)

    def test_deterministic_given_rng_state(self):
        pool = zero_pool()
        cfg = PoisonConfig(target_class=1, n_poison=5, npp=KEY)
        a = forge_poison_set(pool, cfg, np.random.default_rng(9))
        b = forge_poison_set(pool, cfg, np.random.default_rng(9))
        for ta, tb in zip(a, b):
            assert np.array_equal(ta.data, tb.data)


class TestPoisonMerge:
    def test_sizes_add(self, rng):
        train = toy_pool(rng, n_trials=12)
        cfg = PoisonConfig(target_class=1, n_poison=4, npp=KEY)
        poison = forge_poison_set(train, cfg, rng)
        merged = poison_merge(train, poison)
        assert len(merged) == 16

    def test_empty_poison_identity(self, rng):
        train = toy_pool(rng, n_trials=5)
        merged = poison_merge(train, [])
        assert merged.trials == train.trials

    def test_multiset_preserved_under_shuffle(self, rng):
        train = toy_pool(rng, n_trials=10)
        cfg = PoisonConfig(target_class=1, n_poison=3, npp=KEY)
        poison = forge_poison_set(train, cfg, rng)
        merged = poison_merge(train, poison, rng=np.random.default_rng(4))
        expected = sorted(t.data.tobytes() for t in list(train.trials) + poison)
        got = sorted(t.data.tobytes() for t in merged.trials)
        assert got == expected

    def test_shuffle_deterministic(self, rng):
        train = toy_pool(rng, n_trials=10)
        cfg = PoisonConfig(target_class=1, n_poison=3, npp=KEY)
        poison = forge_poison_set(train, cfg, np.random.default_rng(0))
        a = poison_merge(train, poison, rng=np.random.default_rng(4))
        b = poison_merge(train, poison, rng=np.random.default_rng(4))
        assert [t.data.tobytes() for t in a.trials] == [t.data.tobytes() for t in b.trials]

    def test_shape_mismatch_rejected(self, rng):
        train = toy_pool(rng, n_trials=4)
        bad = [make_trial(rng.standard_normal((3, 32)), fs=64.0, label=1)]
        with pytest.raises(ConfigError):
            poison_merge(train, bad)


def trivial_pipeline(rng, n_channels=4, bias=0.0):
    """CSP pipeline with a zero-weight head: predicts class 1 everywhere."""
    trials = [make_trial(rng.standard_normal((n_channels, 32)), label=i % 2)
              for i in range(10)]
    filters = fit_csp(trials, [t.label for t in trials], n_pairs=2)
    lr = LogRegModel(weights=np.zeros(4), bias=bias,
                     feature_mean=np.zeros(4), feature_scale=np.ones(4))
    return Pipeline(filters=filters, feature_kind="csp_logvar", lr=lr)


class TestEvalAcc:
    def test_always_target_model(self, rng):
        pipe = trivial_pipeline(rng)
        all_ones = make_dataset(
            [make_trial(rng.standard_normal((4, 32)), label=1) for _ in range(9)],
            n_channels=4,
        )
        assert eval_acc(pipe, all_ones) == 1.0
        all_zeros = make_dataset(
            [make_trial(rng.standard_normal((4, 32)), label=0) for _ in range(9)],
            n_channels=4,
        )
        assert eval_acc(pipe, all_zeros) == 0.0

    def test_mixed_fraction(self, rng):
        pipe = trivial_pipeline(rng, bias=-20.0)  # always predicts class 0
        labels = [0, 0, 0, 1]
        ds = make_dataset(
            [make_trial(rng.standard_normal((4, 32)), label=l) for l in labels],
            n_channels=4,
        )
        assert eval_acc(pipe, ds) == pytest.approx(0.75)

    def test_empty_rejected(self, rng):
        pipe = trivial_pipeline(rng)
        with pytest.raises(ConfigError):
            eval_acc(pipe, make_dataset([make_trial(np.zeros((4, 32)))],
                                        n_channels=4).subset([]))


class TestEvalAsr:
    pp = PreprocessConfig(target_fs=64.0, band_low=4.0, band_high=20.0)

    def _fitted(self, rng):
        """Real pipeline trained on preprocessed toy data."""
        def hot(ch, label):
            data = 0.1 * rng.standard_normal((6, 32))
            data[ch] += rng.standard_normal(32)
            return make_trial(data, fs=64.0, label=label)

        trials = [hot(1, 0) for _ in range(30)] + [hot(2, 1) for _ in range(30)]
        raw = make_dataset(trials, n_channels=6)
        clean = preprocess(raw, self.pp)
        pipe = fit_pipeline(clean.subset(range(0, 60, 2)),
                            clean.subset(range(1, 60, 2)),
                            "csp_logvar", TrainOptions(max_epochs=200, patience=30))
        return raw, pipe

    def test_zero_amplitude_matches_clean_misclassification(self, rng):
        raw, pipe = self._fitted(rng)
        silent = NppParams(period_T=0.25, duty_d=0.2, amplitude_a=0.0)
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=silent)
        asr = eval_asr(pipe, raw, cfg, self.pp)
        clean = preprocess(raw, self.pp)
        nontarget = [t for t in clean.trials if t.label != 1]
        expected = sum(predict(pipe, t)[0] == 1 for t in nontarget) / len(nontarget)
        assert asr == pytest.approx(expected)

    def test_repeat_calls_identical(self, rng):
        raw, pipe = self._fitted(rng)
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY, seed=6)
        assert eval_asr(pipe, raw, cfg, self.pp) == eval_asr(pipe, raw, cfg, self.pp)

    def test_trial_order_invariant_with_fixed_phase(self, rng):
        raw, pipe = self._fitted(rng)
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY,
                           random_phase=False)
        shuffled = raw.with_trials(
            [raw.trials[i] for i in np.random.default_rng(2).permutation(len(raw))]
        )
        assert eval_asr(pipe, raw, cfg, self.pp) == eval_asr(pipe, shuffled, cfg, self.pp)

    def test_does_not_mutate_test_set(self, rng):
        raw, pipe = self._fitted(rng)
        before = [t.data.copy() for t in raw.trials]
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY)
        eval_asr(pipe, raw, cfg, self.pp)
        for t, snap in zip(raw.trials, before):
            assert np.array_equal(t.data, snap)

    def test_test_npp_override_used(self, rng):
        raw, pipe = self._fitted(rng)
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY,
                           random_phase=False)
        silent = NppParams(period_T=0.25, duty_d=0.2, amplitude_a=0.0)
        base = eval_asr(pipe, raw, cfg, self.pp, test_npp=silent)
        clean = preprocess(raw, self.pp)
        nontarget = [t for t in clean.trials if t.label != 1]
        expected = sum(predict(pipe, t)[0] == 1 for t in nontarget) / len(nontarget)
        assert base == pytest.approx(expected)

    def test_all_target_test_set_rejected(self, rng):
        raw, pipe = self._fitted(rng)
        only_target = raw.with_trials([t for t in raw.trials if t.label == 1])
        cfg = PoisonConfig(target_class=1, n_poison=1, npp=KEY)
        with pytest.raises(ConfigError):
            eval_asr(pipe, only_target, cfg, self.pp)

"""Walkthrough: parameter sweeps over the attack knobs.

Three sweeps on one shared dataset: how little poisoning is enough, how
weak the test-time key can get, and whether a mismatched period/duty key
still triggers the backdoor. Writes the poison-ratio records to JSON.
"""

import json

from npplab import (
    ExperimentConfig,
    NppParams,
    PreprocessConfig,
    SyntheticSpec,
    load_config_dataset,
    run_sweep,
)

config = ExperimentConfig(
    preprocess=PreprocessConfig(target_fs=128.0, band_low=8.0, band_high=30.0),
    npp=NppParams(period_T=0.2, duty_d=0.1, amplitude_a=1.0),
    synthetic=SyntheticSpec(n_subjects=5, trials_per_subject_per_class=50, seed=8),
    poison_ratio=0.10,
    master_seed=1,
)
dataset = load_config_dataset(config)  # generate once, reuse across sweeps

print("sweep 1: poisoning ratio")
records = run_sweep(config, "poison_ratio", [0.0, 0.02, 0.05, 0.10],
                    threads=4, dataset=dataset)
for rec in records:
    print(f"  ratio {rec['value']:.2f}: ACC {rec['acc_mean']:.3f} "
          f"ASR {rec['asr_mean']:.3f}")
with open("poison_ratio_sweep.json", "w") as fh:
    json.dump(records, fh, indent=2)
print("  -> poison_ratio_sweep.json")

print("\nsweep 2: test-time amplitude ratio (training fixed at 1.0)")
records = run_sweep(config, "amplitude_ratio", [0.25, 0.5, 1.0, 1.5],
                    threads=4, dataset=dataset)
for rec in records:
    print(f"  ratio {rec['value']:.2f}: ASR {rec['asr_mean']:.3f}")

print("\nsweep 3: train x test period/duty grid")
keys = [(0.1, 0.1), (0.2, 0.1)]
records = run_sweep(config, "period_duty", keys, threads=4, dataset=dataset)
for rec in records:
    marker = " (matched)" if rec["train_value"] == rec["test_value"] else ""
    print(f"  train {rec['train_value']} test {rec['test_value']}: "
          f"ASR {rec['asr_mean']:.3f}{marker}")
print("a key with the wrong period still fires the backdoor to a degree; "
      "the trigger is not a brittle exact pattern")

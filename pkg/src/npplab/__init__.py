"""npplab: a desk-scale lab for NPP backdoor attacks on EEG BCI classifiers.

Generates or loads epoched EEG datasets, injects narrow-period-pulse
backdoor keys into training sets, trains CSP/xDAWN + logistic-regression
pipelines, and measures clean accuracy (ACC) and attack success rate (ASR)
across leave-one-subject-out experiments and parameter sweeps.
"""

from .attack import (
    AttackReport,
    PoisonConfig,
    channel_subset,
    eval_acc,
    eval_asr,
    forge_poison_set,
    poison_merge,
)
from .dataio import load_dataset, save_dataset, write_report
from .errors import (
    ConfigError,
    DegenerateChannelError,
    FormatError,
    NpplabError,
    NumericalError,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    SplitPlan,
    config_fingerprint,
    config_from_dict,
    config_to_dict,
    experiment_plan,
    load_config_dataset,
    loso_plan,
    run_experiment,
    run_single,
    run_sweep,
    split_train_val,
    summarize,
    undersample,
)
from .models import (
    LogRegModel,
    Pipeline,
    SpatialFilters,
    TrainOptions,
    csp_logvar_features,
    fit_csp,
    fit_logreg,
    fit_pipeline,
    fit_xdawn,
    load_pipeline,
    predict,
    save_pipeline,
    xdawn_features,
)
from .npp import (
    ChannelMask,
    NppParams,
    amplitude_for_ratio,
    apply_key,
    draw_random_phase,
    sample_npp,
)
from .signal_core import (
    Dataset,
    PreprocessConfig,
    Trial,
    bandpass,
    channel_std_stats,
    clip,
    downsample,
    preprocess,
    rereference_average,
    rereference_channel,
    zscore,
)
from .synth import SyntheticSpec, gen_synthetic

__version__ = "0.1.0"

"""Density-balanced coreset selection for trajectory-prediction datasets.

Pipeline: partition scenes by agent density, extract per-scene gradient
features from a pretrained toy predictor, hand out per-bucket budgets in
reverse density order, and greedily pick a representative, diverse subset
inside each bucket.  Baselines and a training/evaluation harness verify
that the selected subsets rebalance density and help where data is scarce.
"""

from .baselines import BaselineConfig, select_herding, select_kmeans, select_random
from .errors import (
    ContractError,
    DataFormatError,
    HorizonMismatchError,
    NumericsError,
    SstpError,
    UsageError,
)
from .evaluation import (
    ExperimentConfig,
    ExperimentReport,
    MetricReport,
    evaluate,
    min_ade,
    min_fde,
    miss_rate_indicator,
    run_experiment,
)
from .features import FeatureRecord, FeatureSet, extract_features, read_features, write_features
from .partitioning import (
    BudgetPlan,
    PartitionPlan,
    Provenance,
    SelectionResult,
    assemble,
    dynamic_budget,
    partition,
    read_selection,
    select_baseline,
    select_sstp,
    total_budget,
    write_selection,
)
from .predictor import (
    LossBreakdown,
    ModelConfig,
    PredictionOutput,
    ToyPredictorParams,
    encode_input,
    forward,
    grad_wrt_latent,
    grad_wrt_output,
    init_params,
    loss,
    predict_scene,
    pretrain,
    read_params,
    write_params,
)
from .scene_data import (
    AgentTrack,
    Dataset,
    MixtureComponent,
    Scene,
    SynthConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .submodular import BucketSelectionState, cosine_sim, select_bucket

__version__ = "0.1.0"

"""Active distance-metric learning from relative-comparison queries."""

from .dataset import Dataset, DatasetView, Split, load_csv, make_synthetic_gaussians, split, standardize
from .forest import ClassProbs, ForestParams, estimate_class_probs
from .clustering import Clustering, kmeans
from .metric import LearnerParams, MetricWeights, distance_sq, learn_metric, predict_answer
from .oracle import Answer, AnswerTable, LabeledTripletSet, Triplet, enumerate_answer_table, simulated_answer
from .selection import (
    ActiveLoop,
    AnswerProbs,
    Pool,
    SelectionParams,
    SimulatedOracle,
    answer_probs,
    info_gain,
    posterior_entropy,
    prior_entropy,
    run_active_loop,
    sample_pool,
    select_query,
)
from .evaluation import (
    ExperimentConfig,
    ExperimentReport,
    PolicyKind,
    baseline_next,
    one_nn_accuracy,
    run_experiment,
    triplet_accuracy,
)

__version__ = "0.1.0"

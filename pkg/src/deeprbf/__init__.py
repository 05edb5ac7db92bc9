"""Stacked Gaussian RBF networks for short-term traffic-flow prediction.

Backprop and genetic training, a traffic domain model (flow, density ratio,
congestion levels), a CSV data pipeline and a reproducible CLI harness.
"""

__version__ = "0.1.0"

from .errors import (
    ChromosomeError,
    ConfigError,
    DataError,
    DimensionError,
    LabelError,
    MissingArtifactError,
    NonFiniteLossError,
    RbfError,
)
from .network import (
    NetworkSpec,
    RbfLayer,
    RbfNetwork,
    RbfUnit,
    gaussian_rbf,
    init_network,
    network_forward,
    predict,
    rbf_layer_forward,
)
from .training import (
    LossHistory,
    TrainingConfig,
    backprop,
    compute_loss,
    finite_difference_gradients,
    train,
)
from .genetic import (
    Chromosome,
    FitnessHistory,
    GaConfig,
    decode_chromosome,
    encode_chromosome,
    evolve,
    fitness,
)
from .traffic import (
    CongestionLevel,
    DensityProfile,
    FeatureSpec,
    Level,
    TrafficObservation,
    build_features,
    classify_congestion,
    tdr,
    traffic_flow,
)
from .data import CleanPolicy, Dataset, NormStats, SynthConfig, clean, load_csv, normalize, preprocess, split, synth_generate
from .metrics import EvaluationReport, classification_metrics, evaluate, mae
from .report import compare_report, emit_plot_data, load_fixture

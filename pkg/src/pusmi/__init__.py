"""Mutual information estimation from positive-unlabeled data.

Estimates squared-loss mutual information between inputs and binary labels
when only positive and unlabeled samples are available, and builds on that
estimator for representation learning and independence testing.
"""

from .basis import GaussianBasis, eval_basis, median_bandwidth, select_centers
from .data import (
    ClassPrior,
    GaussianMixtureSpec,
    LabeledDataset,
    MinMaxScaler,
    PuDataset,
    load_csv,
    load_libsvm,
    make_pu,
    sample_gaussian_labeled,
    sample_gaussian_pu,
    save_libsvm,
)
from .errors import (
    CapacityError,
    DegenerateDataError,
    DivergenceError,
    IllConditionedError,
    NumericsError,
    ParseError,
    QuadratureError,
)
from .estimator import (
    EstimatorConfig,
    FitReport,
    RatioModel,
    SmiEstimate,
    classify,
    cross_validate,
    estimate_from_model,
    estimate_smi,
    fit_analytic,
    j_hat,
    model_from_dict,
    model_to_dict,
    posterior,
    smi_from_j,
)
from .experiments import (
    PurlToyResult,
    fig1_sweep,
    fig1_sweep_labeled,
    purl_toy,
    toy_purl_config,
)
from .mlp import (
    MlpParams,
    MlpSpec,
    SgdConfig,
    backward,
    forward,
    init_params,
    params_from_dict,
    params_to_dict,
    sgd_step,
)
from .puit import PermTestResult, p_value_from_ranks, permutation_test, type2_experiment
from .purl import (
    PurlConfig,
    PurlResult,
    head_scores,
    pca_project,
    train_purl,
    transform,
)
from .supervised import (
    JointRatioModel,
    estimate_smi_pn,
    fit_pn,
    j_hat_pn,
    smi_hat_pn,
    true_smi_quadrature,
)

__version__ = "0.1.0"

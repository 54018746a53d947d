"""Wavelet-domain finite mixture regression for scalar responses on curves."""

from .estimators import WaveletDesign, WaveletMixtureRegressor
from .fit import FitConfig, FitResult, adaptive_fit, em_fit, initialize
from .model import (
    MixtureParams,
    from_natural,
    log_likelihood,
    penalized_objective,
    predictive_loss,
    responsibilities,
    to_natural,
)
from .simulate import SimSetting, brownian_bridge, calibrate_sigma, generate_dataset
from .tune import (
    TuneGrid,
    TuneResult,
    bic_search,
    kfold_cv,
    lambda_grid,
    modified_bic,
    select_components,
    train_validate_test,
)
from .wavelet import WaveletSpec, build_design, dwt, idwt, reconstruct_omegas

__version__ = "0.1.0"

__all__ = [
    "FitConfig",
    "FitResult",
    "MixtureParams",
    "SimSetting",
    "TuneGrid",
    "TuneResult",
    "WaveletDesign",
    "WaveletMixtureRegressor",
    "WaveletSpec",
    "adaptive_fit",
    "bic_search",
    "brownian_bridge",
    "build_design",
    "calibrate_sigma",
    "dwt",
    "em_fit",
    "from_natural",
    "generate_dataset",
    "idwt",
    "initialize",
    "kfold_cv",
    "lambda_grid",
    "log_likelihood",
    "modified_bic",
    "penalized_objective",
    "predictive_loss",
    "reconstruct_omegas",
    "responsibilities",
    "select_components",
    "to_natural",
    "train_validate_test",
]

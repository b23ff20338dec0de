"""One-sample Mantel-Haenszel analysis of single-arm basket trials."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # source checkout without install
    __version__ = "0.0.0"

from .core_types import (
    IWOR,
    IWRR,
    OR,
    RD,
    RR,
    BasketRecord,
    BasketTable,
    EffectEstimate,
    EffectScale,
    Partition,
    Scale,
    WeightPolicy,
)
from .errors import (
    BasketError,
    CombinatorialLimit,
    DataError,
    DegenerateDenominator,
    DegenerateFit,
    EmptySubclass,
    EmptyTable,
    EstimationError,
    LatticeOverflow,
    ParseError,
    ScenarioError,
    SingletonBasket,
)
from .estimators import (
    clopper_pearson,
    estimate,
    mh_estimate,
    mh_variance,
    misspecification_limit,
    wald_ci,
)
from .exact_test import exact_test, null_distribution, p_value
from .gic import Strategy, model_gic, rank_models, subclass_gic
from .gof import gof_test
from .io import load_dataset, load_scenario, read_table
from .simulation import (
    ScenarioSpec,
    generate_dataset,
    run_estimation_study,
    run_identification_study,
)

__all__ = [name for name in dir() if not name.startswith("_")]

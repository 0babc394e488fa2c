"""Fast library-based hyperspectral unmixing.

Functional API (domain orientation, bands x pixels) re-exported here from
the submodules; scikit-learn style estimators (pixels x bands) are loaded
lazily from :mod:`funmix.estimators`.
"""

from .core import (
    ConstraintReport,
    DimensionMismatchError,
    ModelDims,
    NotOvercompleteWarning,
    as_matrix,
    constraint_violations,
    objective_value,
)
from .quec import (
    FactorizationError,
    QuecFactors,
    kkt_oracle_solve,
    quec_factorize,
    quec_solve,
)
from .solvers import (
    AdmmParams,
    Diagnostics,
    NonFiniteIterateError,
    Residuals,
    SolverState,
    UnmixResult,
    a_step,
    b_step_fasun,
    b_step_suns,
    fasun,
    fclsu_admm,
    soft_threshold,
    suns,
)
from .simulate import (
    AcceptanceStallError,
    DatasetBundle,
    SimulationConfig,
    add_noise_snr,
    generate_dataset,
    generate_dc1,
    sample_purity_abundances,
)
from .metrics import (
    PruneResult,
    ScaledAtomWarning,
    SreReport,
    prune_library,
    spectral_angle,
    sre,
)
from . import io

__version__ = "0.1.0"

_LAZY_ESTIMATORS = ("Fclsu", "Fasun", "Suns")


def __getattr__(name):
    # estimators pull in scikit-learn; load them only when asked for
    if name in _LAZY_ESTIMATORS:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "AcceptanceStallError",
    "AdmmParams",
    "ConstraintReport",
    "DatasetBundle",
    "Diagnostics",
    "DimensionMismatchError",
    "FactorizationError",
    "Fasun",
    "Fclsu",
    "ModelDims",
    "NonFiniteIterateError",
    "NotOvercompleteWarning",
    "PruneResult",
    "QuecFactors",
    "Residuals",
    "ScaledAtomWarning",
    "SimulationConfig",
    "SolverState",
    "SreReport",
    "Suns",
    "UnmixResult",
    "a_step",
    "add_noise_snr",
    "as_matrix",
    "b_step_fasun",
    "b_step_suns",
    "constraint_violations",
    "fasun",
    "fclsu_admm",
    "generate_dataset",
    "generate_dc1",
    "io",
    "kkt_oracle_solve",
    "objective_value",
    "prune_library",
    "quec_factorize",
    "quec_solve",
    "sample_purity_abundances",
    "soft_threshold",
    "spectral_angle",
    "sre",
    "suns",
]

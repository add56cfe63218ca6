"""Signal reconstruction under sparse adversarial corruption with an imperfect
attack-localization oracle."""

from .errors import (
    BudgetExceededError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleError,
    NumericError,
    RankDeficientError,
    ReconError,
)
from .model import (
    AttackSpec,
    IndicatorVector,
    MeasurementModel,
    SupportSet,
    argsort_desc,
    generate_measurement,
    min_singular_value,
    row_select,
    support_of,
)
from .reconstruct import (
    BallConstraint,
    ReconResult,
    bound_cor1,
    bound_thm1,
    constrained_ls,
    ls_reconstruct,
    reconstruct_with_oracle,
    rip_constant,
    sparse_recover_bruteforce,
)
from .support import (
    OracleModel,
    ReliabilityProfile,
    compute_l_eta,
    pmf_convolution_form,
    poisson_binomial_pmf,
    robust_support_random,
    robust_support_ranked,
    sample_oracle,
)

__version__ = "0.1.0"

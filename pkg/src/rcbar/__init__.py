"""Random coefficient bifurcating autoregressive processes: simulation,
least-squares estimation, closed-form limits and Monte Carlo checks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    HypothesisGateError,
    MonteCarloAborted,
    NotPositiveDefinite,
    RcbarError,
    SingularDesign,
    UnstableMoment,
)
from .estimate import (  # noqa: E402
    design_matrices,
    empirical_moment,
    estimate_all,
    estimate_second_order,
    estimate_theta,
    residuals,
)
from .model import (  # noqa: E402
    BivariateGaussian,
    ConstantInitial,
    Degenerate,
    GaussianInitial,
    IndependentUniform,
    ModelSpec,
    derive_moment_set,
    validate_hypotheses,
)
from .montecarlo import (  # noqa: E402
    ExperimentConfig,
    run_clt_experiment,
    run_qsl_experiment,
    run_rate_experiment,
)
from .simulate import simulate_tree  # noqa: E402
from .theory import conditional_noise_moments, limit_matrices, s_moments  # noqa: E402
from .tree import Tree, generation_of, parent_of, subtree_counts  # noqa: E402

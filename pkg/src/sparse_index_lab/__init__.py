"""Prune-then-train learning of sparse single/multi-index models.

Library layout:

- ``hermite``   scalar Hermite polynomial machinery and link functions
- ``model``     statistical models, sparse directions, dataset sampling
- ``network``   two-layer ReLU networks, symmetric init, gradients
- ``oracle``    closed-form and Monte-Carlo population gradients
- ``pruning``   gradient-probe pruning and support recovery
- ``training``  restricted re-init, one large first-layer step, ridge fit
- ``csq``       sparse near-orthogonal packings and the query-noise bound
- ``harness``   experiment sweeps, CSV emission, plots
"""

from .hermite import (
    LinkSpec,
    gauss_hermite_expect,
    he_eval,
    information_exponent,
    link_from_hermite,
    link_from_monomial,
    normalize_link,
    relu_shift_coeff,
    to_hermite,
    to_monomial,
)
from .model import (
    Dataset,
    IndexModel,
    augment,
    check_assumption_full_rank,
    dataset_from_csv,
    dataset_to_csv,
    make_sparse_direction,
    make_sparse_frame,
    sample_dataset,
    soft_sparsity,
)
from .network import (
    NetParams,
    empirical_risk,
    forward,
    grad_a,
    grad_even_odd,
    grad_w_row,
    init_symmetric,
)
from .oracle import (
    FixtureTable,
    mc_population_grad,
    pathological_fixtures,
    population_grad_multi_leading,
    population_grad_single,
    population_grad_single_evenodd,
)
from .pruning import (
    PruneConfig,
    SupportSet,
    prune_network,
    shifted_basis,
    top_m,
)
from .training import (
    Predictor,
    TrainConfig,
    excess_risk,
    first_layer_step,
    fit,
    load_predictor,
    predict,
    restricted_reinit,
    save_predictor,
    second_layer_fit,
)
from .csq import (
    Packing,
    avg_correlation,
    build_packing,
    csq_tau_bound,
    sample_ps,
)

__version__ = "0.1.0"

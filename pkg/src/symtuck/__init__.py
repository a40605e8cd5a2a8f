"""Symmetric Tucker decomposition of dense tensors and of sample moments."""

from .errors import *  # noqa: F401,F403
from .explicit import (
    PgdTrace,
    as_stiefel,
    euclidean_gradient_explicit,
    hoevd_explicit,
    objective_explicit,
    pgd_explicit,
    qr_retract,
    reconstruction_error,
)
from .manifold import (
    CriticalityReport,
    certify_criticality,
    hessian_apply,
    projector,
    relative_gradient,
    riemannian_gradient_grassmann,
    subspace_error,
    tangent_project,
    w_matrix,
)
from .moments import (
    FactorModel,
    SampleBatch,
    SampleStream,
    build_moment,
    sample_factor_model,
    stream_from_model,
    stream_from_pool,
    whiten,
)
from .streaming import (
    AdaGradState,
    TwoPhaseConfig,
    adagrad_step,
    batch_objective,
    estimate_core,
    hoevd_implicit_gradient,
    implicit_gradient,
    s_hoevd,
    scalable_pgd,
)
from .tensor import SymTensor, matricize, multi_mode_product, sym_outer, tucker_product

__version__ = "0.1.0"

"""Langevin Monte Carlo with coordinate-wise gradient estimators.

Overdamped and underdamped samplers driven by full-gradient, random
coordinate (RCD), SVRG and SAGA-type (RCAD) fluxes, with cost counted in
partial-derivative evaluations.
"""

from .estimators import (
    Flux,
    RcadState,
    SelectionDistribution,
    SvrgState,
    full_flux,
    rcad_flux,
    rcd_flux,
    rcd_variance_exact,
    svrg_flux,
)
from .kernels import (
    ALGORITHMS,
    DivergenceError,
    InitSpec,
    KernelCoeffs,
    RunConfig,
    overdamped_step,
    run_chain,
    run_ensemble,
    underdamped_coeffs,
    underdamped_step,
)
from .potentials import (
    GlmDataset,
    NoClosedForm,
    Potential,
    analytic_moment,
    make_double_gaussian,
    make_glm_posterior,
    make_isotropic_gaussian,
    synth_glm_data,
)
from .rng import ChainStreams

__version__ = "0.1.0"

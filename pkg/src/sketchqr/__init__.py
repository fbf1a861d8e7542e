"""Randomized QR toolkit: Householder-style factorizations driven by a
sketched norm, baseline orthogonalizers, Krylov solvers, and a benchmark
CLI for stability experiments."""

from .linalg import (
    SCALE_SQRT2,
    SCALE_UNIT,
    BreakdownError,
    cond_number,
    factorization_errors,
    orthogonality_error,
)
from .precision import DOUBLE_POLICY, PrecisionPolicy, policy_from_tag
from .sketching import (
    EmbeddedSketch,
    GaussianSketch,
    IdentitySketch,
    SparseSignSketch,
    SRHTSketch,
    check_embedding,
    make_sketch,
)
from .rhqr import (
    RHQRFactors,
    lsq_via_implicit_q,
    rec_rhqr,
    rhqr_block,
    rhqr_left,
    rhqr_right,
    sketch_q,
    thin_q,
)
from .trim import TrimFactors, trim_rhqr_left, trim_rhqr_right, trim_thin_q
from .baselines import (
    blas2_rgs,
    cgs,
    householder_qr,
    mgs,
    rand_cholesky_qr,
    rgs,
)
from .krylov import (
    KrylovBundle,
    hessenberg_lstsq,
    rgs_gmres,
    rhqr_arnoldi,
    rhqr_gmres,
)
from .mmio import load_matrix_market, write_matrix_market
from .experiments import (
    ExperimentConfig,
    gen_cmatrix,
    run_factor_experiment,
    run_gmres_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "SCALE_SQRT2", "SCALE_UNIT", "BreakdownError", "cond_number",
    "factorization_errors", "orthogonality_error",
    "DOUBLE_POLICY", "PrecisionPolicy", "policy_from_tag",
    "EmbeddedSketch", "GaussianSketch", "IdentitySketch", "SparseSignSketch",
    "SRHTSketch", "check_embedding", "make_sketch",
    "RHQRFactors", "lsq_via_implicit_q", "rec_rhqr", "rhqr_block",
    "rhqr_left", "rhqr_right", "sketch_q", "thin_q",
    "TrimFactors", "trim_rhqr_left", "trim_rhqr_right", "trim_thin_q",
    "blas2_rgs", "cgs", "householder_qr", "mgs", "rand_cholesky_qr", "rgs",
    "KrylovBundle", "hessenberg_lstsq", "rgs_gmres", "rhqr_arnoldi",
    "rhqr_gmres",
    "load_matrix_market", "write_matrix_market",
    "ExperimentConfig", "gen_cmatrix", "run_factor_experiment",
    "run_gmres_experiment",
]

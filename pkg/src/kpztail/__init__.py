"""Lower-tail Fredholm determinants of the deformed Airy kernel.

Nystrom evaluation of Q(s, T) = det(1 - sigma K^Ai) in two equivalent
representations, the equilibrium (g-function) quantities behind its
large-s asymptotics, and the closed-form asymptotic formulas themselves.
"""

from .airy import AiryPair, airy_eval, airy_kernel
from .asymptotics import (
    AsymptoticBreakdown,
    TailBracket,
    dlogq_ds_asymptotic,
    dlogq_dT_asymptotic,
    kpz_tail_bracket,
    log_q_asymptotic,
    log_q_expansion_fixed_T,
    naive_estimate,
    rate_phi,
    tw_tail_expansion,
)
from .equilibrium import (
    EquilibriumData,
    g_combination,
    lambda0_asymptotic,
    potential_v,
    psi,
    solve_lambda0,
    step_lemma_error,
    w_at,
)
from .errors import (
    DomainError,
    DominanceNotEstablished,
    KpzTailError,
    NoConvergence,
    QuadratureFailure,
    RangeExceeded,
    SpectrumOutOfRange,
    TruncationTooTight,
)
from .fredholm import (
    FredholmResult,
    convergence_scan,
    dlog_q_ds,
    dlog_q_dT,
    log_q,
    tracy_widom_log_cdf,
)
from .kernels import (
    KernelRep,
    Params,
    fermi,
    finite_temperature_kernel,
    indicator_kernel,
    sigma_weighted_kernel,
)
from .numerics import NumericField, Precision, QuadratureRule, SymmetricMatrix

__version__ = "0.1.0"

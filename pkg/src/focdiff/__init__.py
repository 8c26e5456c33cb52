"""Parallel spatial diffusion of charged particles under adiabatic focusing.

Three definitions of the diffusion coefficient (Fick's law, displacement
variance, velocity-autocorrelation integral) computed and cross-checked by
exact symbolic rewriting of the isotropic transport equation, nested
quadrature of the closed-form coefficients, and stochastic simulation.
"""

from .errors import AlgebraError, ConfigError, InvariantViolation, ModelError, NumericalFailure
from .models import (
    PitchGrid,
    ScatteringSetup,
    default_grid,
    equilibrium_mean_mu,
    equilibrium_pitch_cdf,
    mu_potential,
    mu_potential_numeric,
    pitch_diffusion,
)
from .ratfunc import RationalCoefficient, kappa_atom, rc, rc_index, symbol
from .eidf import (
    DerivedEquation,
    DioRun,
    DioStep,
    Eidf,
    GombosiRoundtrip,
    MultiIndex,
    apply_derivative,
    bgk_second_order_eidf,
    canonical_focusing_eidf,
    fick_coefficient,
    gombosi_roundtrip,
    parse_dio_step,
    run_dio_script,
    run_dio_step,
    solve_for,
    substitute,
)
from .moments import (
    MomentSystem,
    PolynomialAnsatz,
    ScriptVerification,
    kappa_dv_symbolic,
    moment_odes,
    solve_special,
    standard_scripts,
    verification_report,
    verify_scripts,
)
from .coefficients import (
    CoefficientReport,
    NtzTable,
    SeriesFit,
    coefficient_report,
    kappa_dv_formula,
    kappa_ntz,
    kappa_parallel0,
    kappa_tgk,
    kappa_tz,
    kappa_tzz,
    kappa_z,
    kappa_zz_bw,
    kappa_zz_wq,
    ntz_table,
    series_fit,
    write_coeffs_csv,
)
from .mc import (
    EnsembleStats,
    EquilibriumCheck,
    KdvEstimate,
    SimConfig,
    TgkEstimate,
    VacfRecord,
    equilibrium_check,
    estimate_kappa_dv,
    estimate_kappa_tgk,
    ks_statistic,
    run_ensemble,
    step,
    write_mc_csv,
    write_tgk_csv,
)
from .cli import emit_plotdata, run

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Optimal multipliers for proportional portfolio insurance under jump-diffusion dynamics."""

from .errors import (
    AdmissibilityError,
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    NoSolutionError,
    PPIError,
    QuadratureError,
)
from .kernels import BACKEND
from .market import (
    ConstantJump,
    JumpBounds,
    KouJump,
    MarketParams,
    MertonJump,
    jump_bounds,
    jump_mean,
    levy_drift_integral,
    sample_jump_size,
)
from .simulation import (
    GapRiskEstimate,
    PathBundle,
    SimConfig,
    duality_identity_check,
    expected_utility,
    gap_probability,
    quantile_bands,
    simulate_cppi_classic,
    simulate_cushion_paths,
    state_price_paths,
    value_function_mc,
)
from .solver import (
    ExistenceReport,
    GirsanovKernel,
    MultiplierSolution,
    existence_check,
    g_eval,
    kernel_from_multiplier,
    no_arbitrage_residual,
    solve_multiplier,
)
from .utility import ConcaveEnvelope, UtilityParams, envelope_eval, solve_c_hat, utility_eval
from .backtest import backtest_cppi, load_prices

__version__ = "0.1.0"

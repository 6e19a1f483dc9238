"""Viability of markets with proportional transaction costs on finite trees
and event-driven paths: self-financing accounting, consistent price
systems, shadow prices, arbitrage scans, utility maximisation and the two
counterexample markets."""
from __future__ import annotations

from .counterexamples import (
    GRSExampleReport,
    OAScan,
    PoissonExampleReport,
    grs_barrier_sequences,
    grs_oa_scan,
    grs_tau_distribution,
    poisson_terminal_value,
    poisson_wealth,
    run_grs_example,
    run_poisson_example,
)
from .cps import (
    CPSCertificate,
    CPSSolver,
    VerificationReport,
    deflator_from_measure,
    find_scps,
    solve_cps_lp,
    verify_certificate,
)
from .ledger import (
    LiquidationReport,
    SimpleStrategy,
    TradingStrategy,
    check_admissible,
    embed_simple_strategy,
    holdings,
    liquidation_value,
    strategy_from_positions,
    total_variation,
)
from .lp import LPError, LPResult, simplex_max
from .market_model import (
    EventTree,
    GRSPath,
    ModelConfig,
    PricePath,
    TreeValidationError,
    build_binomial_tree,
    dump_tree,
    format_tree,
    load_paths,
    load_tree,
    parse_tree,
    path_as_tree,
    random_tree,
    sample_grs_outcomes,
    sample_grs_path,
    sample_stopped_poisson,
)
from .scan import (
    ArbitrageScanner,
    ArbitrageWitness,
    InadmissibleStrategyError,
    ObviousArbitrage,
    ShrunkSpread,
    StrategyFamily,
    TailCurve,
    arbitrage_lp,
    buy_and_hold_family,
    detect_obvious_arbitrage,
    leverage_ladder_family,
    shrink_spread,
    upbr_diagnostic,
    zero_family,
)
from .shadow import (
    BandCheck,
    ShadowPriceBuilder,
    ShadowProcess,
    band_stopping_times,
    build_shadow_price,
    verify_band,
)
from .utility import (
    ConvergenceError,
    DualityReport,
    DualSolution,
    NotViableError,
    NumeraireReport,
    PrimalSolution,
    UtilityFunction,
    UtilityMaximizer,
    duality_gap,
    dual_value,
    log_utility,
    maximize_utility,
    numeraire_check,
    parse_utility,
    power_utility,
    random_admissible_strategy,
)

__version__ = "0.1.0"

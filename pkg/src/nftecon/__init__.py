"""Tokenomics engine for NFT valuation through CP-token liquidity pools.

Modules:

``fixedpoint``  18-digit token amounts and exact ratio helpers
``ledger``      token balances, NFT registry, burn sink, supply counters
``amm``         constant-product pool, quotes, slippage, constant-sum baseline
``rarity``      rarity ladder, upgrade attempts, valuation and failure PMF
``rewards``     burning rewards, purchases, inflation factor, reserve sizing
``sim``         scenario engine, agents, Monte Carlo batches
``cli``         command-line entry point
"""

from .amm import (
    AmmPool,
    Side,
    SwapQuote,
    csf_quote,
    execute_swap,
    init_pool,
    quote_exact_out,
    quote_swap,
    required_input,
    slippage_curve,
    spot_ratio,
    trade_to_ratio,
)
from .fixedpoint import TokenAmount, amount
from .ledger import ZERO_ADDRESS, AccountId, Ledger, LedgerError, NftRecord
from .rarity import (
    RarityLadder,
    RarityLevel,
    attempt_upgrade,
    check_inflation_condition,
    expected_next_value,
    failure_pmf,
    max_rarity_factor,
    value_at,
    value_exact,
)
from .rewards import (
    InflationState,
    NftGroup,
    launch_group,
    pay_burn_reward,
    purchase_nft,
    rarity_burn_reward,
    size_reward_reserve,
    uniform_burn_reward,
    update_inflation_factor,
)

__version__ = "0.1.0"

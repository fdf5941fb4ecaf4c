"""mpfix: fixed-point multi-party computation with fast attention ops."""

__version__ = "0.1.0"

from .sharing import AShare, BShare, reconstruct_arith, reconstruct_bits, share_arith, share_bits
from .session import PartySession
from .metrics import CommMetrics, OpCounters
from .config import ScenarioConfig, default_config, load_config
from .nonlinear import (
    ApproxParams,
    DEFAULT_PARAMS,
    attention_exp,
    baseline_exp,
    exponentiation,
    logarithm,
    reciprocal,
)
from .nn import (
    AttentionDims,
    LinearLayer,
    attention_block,
    fold_base2,
    linear_layer,
    load_tensor,
    maxcut,
    mlp_forward,
    relu,
    save_tensor,
    softmax,
)
from .runner import dry_run_demands, prepare_material, run_all, run_party

__all__ = [
    "AShare", "BShare", "share_arith", "share_bits",
    "reconstruct_arith", "reconstruct_bits",
    "PartySession", "CommMetrics", "OpCounters",
    "ScenarioConfig", "default_config", "load_config",
    "ApproxParams", "DEFAULT_PARAMS",
    "reciprocal", "exponentiation", "logarithm", "baseline_exp", "attention_exp",
    "AttentionDims", "LinearLayer", "relu", "maxcut", "softmax",
    "attention_block", "linear_layer", "mlp_forward", "fold_base2",
    "save_tensor", "load_tensor",
    "dry_run_demands", "prepare_material", "run_all", "run_party",
    "__version__",
]

from .basic import (
    add_const,
    and_gate,
    batch_matmul,
    binary_add,
    bit2a,
    compose,
    const_share,
    decompose,
    gt,
    matmul,
    mul,
    public_add_bits,
)
from .derived import (
    evaluate_poly,
    evaluate_square_completed,
    lmo,
    max_vec,
    scale_fixed,
    truncate,
    unsigned_truncate,
)

__all__ = [
    "mul", "matmul", "batch_matmul", "and_gate", "binary_add", "public_add_bits",
    "bit2a", "compose", "decompose", "gt", "add_const", "const_share",
    "truncate", "unsigned_truncate", "scale_fixed", "evaluate_poly",
    "evaluate_square_completed", "lmo", "max_vec",
]

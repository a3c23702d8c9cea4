"""Verified generation, reward shaping and evaluation of first integrals
for two-dimensional first-order ODE systems."""

from .expr import (
    Binary,
    Const,
    DomainError,
    Expr,
    ExprStats,
    UnbalancedArityError,
    UnknownTokenError,
    UnknownVariableError,
    Unary,
    Var,
    eval_numeric,
    expr_stats,
    free_vars,
    parse_polish,
    polish_str,
    print_infix,
    print_polish,
    substitute,
)
from .simplify import (
    SimplificationBlowupError,
    ZeroTestConfig,
    is_identically_zero,
    simplify,
    simplify_report,
    work_budget,
    zero_test,
)
from .calculus import (
    JacobianBlocks,
    OdeSystem,
    VerificationResult,
    jacobian_blocks,
    partial_derivative,
    total_derivative,
    verify_first_integral,
)
from .backgen import (
    GenerationBudgetError,
    IntegralPair,
    InternalVerificationError,
    InversionRejected,
    SamplerConfig,
    SeedSpec,
    draw_random_tree,
    filter_nontrivial,
    generate_dataset,
    generate_pair,
    invert,
    sample_family,
    sample_integral,
)
from .reward import (
    RewardConfig,
    classify,
    levenshtein,
    penalty,
    reward_group,
    reward_one,
    shaping,
)
from .dataset import (
    DatasetRecord,
    blend,
    dedup,
    make_testset,
    read_records,
    record_from_pair,
    split,
    write_records,
)
from .harness import (
    EvalReport,
    enumerate_baseline,
    evaluate,
    verify_candidates,
)

__version__ = "0.1.0"

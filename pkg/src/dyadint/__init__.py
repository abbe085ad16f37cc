"""dyadint: validated Riemann integration on dyadic cubes.

The integral of a bounded, compactly supported function is bracketed by
two explicit sequences of lower and upper sums over the dyadic cube
partitions of R^m.  This package computes those brackets rigorously:
per-cube bounds are interval-arithmetic enclosures with outward
rounding, sums are verified compensated reductions, and every reported
enclosure is sound.  On top of the core sit Jordan measure of constraint
regions, null-set tests, Newton-Leibniz verification, repeated (Fubini)
integration cross-checks, and a bridge to classical partition sums.
"""

from .bridge import (
    EquivalenceReport,
    Partition,
    classical_sums,
    closed_cube_sums,
    default_schedule,
    equivalence_report,
)
from .calculus import (
    FubiniReport,
    NLCheck,
    ParameterIntegralOracle,
    RepeatedIntegralPlan,
    RepeatedResult,
    fubini_check,
    make_plan,
    newton_leibniz_check,
    parameter_integral,
    repeated_integral,
    y_simple_region,
)
from .errors import (
    CapError,
    DimensionError,
    DomainError,
    DyadintError,
    ParseError,
    PreconditionError,
    SoundnessError,
)
from .expr import Expr, eval_interval, eval_point, parse_expr
from .geometry import (
    Box,
    DyadicCube,
    DyadicRational,
    children,
    cube_containing,
    cubes_intersecting,
    parse_box,
    volume,
)
from .integrate import (
    AdditivityReport,
    DyadicSumReport,
    Row,
    Verdict,
    VerySmallResult,
    additivity_check,
    dyadic_sums,
    integrate,
    is_very_small,
    jordan_measure,
)
from .intervals import Interval
from .oracles import (
    BoundOracle,
    Classification,
    Region,
    absolute,
    add,
    from_expr,
    indicator,
    lipschitz_compose,
    maximum,
    minimum,
    mul,
    neg_part,
    parse_oracle,
    pos_part,
    region_from_box,
    region_from_json,
    restrict,
    scale,
    zero,
)

__version__ = "0.1.0"

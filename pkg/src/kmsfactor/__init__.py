"""Factor-type classification for equilibrium weights on weighted graph shifts."""

from .graphs import (
    Arrow,
    FinitePath,
    Graph,
    GraphFamily,
    GraphFormatError,
    check_simplicity,
    is_strongly_connected,
    parse_graph,
    parse_graph_file,
    potential_of_path,
)
from .green import (
    GreenResult,
    WeightedAdjacency,
    build_adjacency,
    green,
    is_dissipative,
    spectral_radius,
)
from .detours import (
    ClosedSubgroup,
    Detour,
    DetourSemigroup,
    HorizonDeltaSet,
    classify_semigroup,
    enumerate_detours,
    loop_difference_group,
    real_gcd,
    tail_semigroup,
    theta_f,
    zero_membership,
)
from .exits import (
    ExitPath,
    check_beta_summable,
    classify_product_tail,
    conformal_measure,
    is_slim,
    product_vectors,
    semifinite_exit_verdict,
)
from .orbits import (
    OrbitPair,
    RangeHistogram,
    cocycle_value,
    compare_to_prediction,
    essential_range_estimate,
    sample_histogram,
    sample_pairs,
)
from .classify import ClassificationRequest, FactorVerdict, classify, report

__version__ = "0.1.0"

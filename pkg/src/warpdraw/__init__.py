"""Butterfly-patterned partial sums for discrete sampling on an emulated warp."""

from .butterfly import (
    Replacement,
    SpanSum,
    apply_replacement_sets,
    entry_oracle,
    entry_span,
    final_symbolic,
    replace_four,
    replacement_schedule,
    singleton_grid,
)
from .kernels import (
    ButterflyTable,
    InjectedStops,
    SeededStops,
    StopOutOfRangeError,
    build_block_tables,
    build_butterfly_table,
    butterfly_search,
    cache_theta_transposed,
    compute_partial_sums_transposed,
    draw_z,
    draw_z_basic,
    draw_z_butterfly,
    draw_z_transposed,
)
from .rng import Xoshiro256StarStar, derive_seed, unit_for, units_for
from .sampling import (
    AliasTable,
    AllZeroError,
    EmptyWeightsError,
    PrefixTable,
    alias_draw,
    binary_search,
    build_alias_vose,
    build_prefix,
    draw,
    linear_search,
    load_weights,
    oracle_index,
    oracle_index_batch,
)
from .warp import (
    GlobalArray2D,
    LaneOutOfRangeError,
    LocalArray,
    MaskOutOfRangeError,
    MemoryEvent,
    OutOfBoundsError,
    RegisterArray,
    Trace,
    Warp,
    WarpConfig,
)

__version__ = "0.1.0"

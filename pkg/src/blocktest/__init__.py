"""Block-based tests for changes in the mean of 2-D random fields on a regular grid."""

from .changetests import (
    TestKind,
    TestResult,
    gmd_statistic,
    gmd_U,
    holm_adjust,
    p_value,
    run_test,
    var_statistic,
)
from .decorrelate import (
    AutocovTable,
    CovarianceModel,
    assemble_full,
    assemble_separable,
    bandwidth,
    decorrelate_grid,
    empirical_autocov,
    estimate_autocov_table,
    RepairMethod,
    fit_covariance,
    inverse_sqrt,
    modified_cholesky,
    psd_repair,
    whiten,
)
from .errors import BlockTestError, StatisticalError
from .fieldgen import (
    DependenceSpec,
    NoiseDist,
    NoiseSpec,
    gen_dependent,
    gen_field,
    gen_iid,
    sar_approx_weights,
    sma_weights,
)
from .grid import (
    BlockPartition,
    MeanSurface,
    SurfaceKind,
    block_means,
    eval_mean_surface,
    make_partition,
    sample_variance,
)

__version__ = "0.1.0"

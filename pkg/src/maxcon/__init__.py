"""Maximum contrast tests for genotype / pharmacokinetic response screening.

Submodules
----------
core       data model, contrast algebra, group summaries
mvdist     multivariate normal / t probabilities (randomized QMC), densities, samplers
stattests  MCM, MMCM, permuted MMCM and Kruskal-Wallis tests
power      critical values, power functions, true-pattern detection rates
simulate   scenario generator, metric estimation and timing benchmark
cli        command line front end (``maxcon``)
"""
from .core import (
    ContrastMatrix,
    GroupedDataset,
    GroupSummary,
    default_pg_contrasts,
    log_transform,
    summarize,
    validate_contrasts,
)
from .mvdist import (
    CovarianceModel,
    ProbEstimate,
    QmcConfig,
    factorize,
    mvn_cdf,
    mvt_cdf,
    mvt_null_density,
    sample_statistics,
)
from .stattests import (
    PermutationConfig,
    StatisticVector,
    TestResult,
    kruskal_wallis_test,
    max_contrast_test,
    modified_max_contrast_test,
    permuted_modified_max_contrast_test,
)

__version__ = "0.1.0"

"""psmall: a certificate engine and simulation lab for p-small covers and
delta-small large-supremum events of positive selector, infinitely
divisible, and empirical processes.

The package builds the witnessing covers explicitly, with exact rational
arithmetic everywhere a bound is claimed, and validates them against
brute-force oracles and Monte Carlo simulation.
"""

from .certificates import (
    CertEntry,
    DeltaSmallCertificate,
    EntryStat,
    VerifyReport,
)
from .empirical import (
    EmpiricalInstance,
    EmpiricalPartition,
    StepFn,
    auto_tune_emp,
    build_emp_certificate,
    discretize_emp,
    estimate_S_emp,
    verify_emp_certificate,
)
from .levy import (
    Box,
    CellPartition,
    LevyMeasureSpec,
    auto_tune,
    build_id_certificate,
    discretize,
    estimate_S,
    sample_ppp,
    verify_id_certificate,
)
from .selector import (
    Estimate,
    SelectorInstance,
    SplitParams,
    binomial_tail,
    certify_main1,
    expected_sup,
    remark1_certificate,
    split_certify,
    threshold_family,
    uniform_subset_expectation,
    verify_main2,
    verify_malarodzina,
    verify_master,
    verify_porsup,
)
from .sets import (
    CoverCertificate,
    SetFamily,
    Subset,
    cover_weight,
    is_p_small,
    min_cover_weight,
    upset_cover_check,
)
from .witness import (
    WeightedFamily,
    WitnessRecord,
    bad_probability_exact,
    build_bad_cover,
    build_witness,
    is_c_bad,
    key_lemma_bound,
    level_j,
    sorted_prefix,
    threshold_epsilon,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CellPartition",
    "CertEntry",
    "CoverCertificate",
    "DeltaSmallCertificate",
    "EmpiricalInstance",
    "EmpiricalPartition",
    "EntryStat",
    "Estimate",
    "LevyMeasureSpec",
    "SelectorInstance",
    "SetFamily",
    "SplitParams",
    "StepFn",
    "Subset",
    "VerifyReport",
    "WeightedFamily",
    "WitnessRecord",
    "auto_tune",
    "auto_tune_emp",
    "bad_probability_exact",
    "binomial_tail",
    "build_bad_cover",
    "build_emp_certificate",
    "build_id_certificate",
    "build_witness",
    "certify_main1",
    "cover_weight",
    "discretize",
    "discretize_emp",
    "estimate_S",
    "estimate_S_emp",
    "expected_sup",
    "is_c_bad",
    "is_p_small",
    "key_lemma_bound",
    "level_j",
    "min_cover_weight",
    "remark1_certificate",
    "sample_ppp",
    "split_certify",
    "sorted_prefix",
    "threshold_epsilon",
    "threshold_family",
    "uniform_subset_expectation",
    "upset_cover_check",
    "verify_emp_certificate",
    "verify_id_certificate",
    "verify_main2",
    "verify_malarodzina",
    "verify_master",
    "verify_porsup",
]

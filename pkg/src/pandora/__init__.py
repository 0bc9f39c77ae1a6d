"""Costed search under correlation: box search, quit-price search, set cover
with feedback, and scenario identification, tied together by cost-preserving
transformations, with exact brute-force references and a compressed-state
solver for mixtures of product distributions.
"""

from .mixture import (
    DPResult,
    EvidenceList,
    FiniteDist,
    MixturePBInstance,
    MixtureSolveResult,
    classify_boxes,
    dp_solve,
    eliminate,
    mixture_pb_solve,
    opt_mixture_pb,
    opt_mixture_threshold,
    tv_distance,
    update_evidence,
)
from .model import (
    DTInstance,
    ExplicitPBInstance,
    InstanceError,
    MSSCfInstance,
    PolicyError,
    PolicyTree,
    ThresholdPBInstance,
    Value,
    eval_dt,
    eval_msscf,
    eval_pb,
    eval_threshold,
    min_finite,
    render_policy,
    require_valid,
    simulate,
    validate,
)
from .oracles import opt_dt, opt_msscf, opt_pb, opt_threshold
from .reductions import (
    ExpandResult,
    PhaseRun,
    ReductionCertificate,
    ThresholdSearch,
    binary_search_threshold,
    expand,
    msscf_to_dt,
    msscf_to_pb,
    pb_phases,
    pb_phases_uniform,
    pb_to_pbt_naive,
    pbt_to_umsscf,
    udt_to_umsscf,
)
from .solvers import (
    greedy_dt,
    greedy_msscf,
    greedy_threshold,
    nonadaptive_mssc_order,
    order_policy,
    pipeline_pb_direct,
    pipeline_pb_via_udt,
)

__version__ = "0.1.0"

__all__ = [
    "DPResult",
    "DTInstance",
    "EvidenceList",
    "ExpandResult",
    "ExplicitPBInstance",
    "FiniteDist",
    "InstanceError",
    "MSSCfInstance",
    "MixturePBInstance",
    "MixtureSolveResult",
    "PhaseRun",
    "PolicyError",
    "PolicyTree",
    "ReductionCertificate",
    "ThresholdPBInstance",
    "ThresholdSearch",
    "Value",
    "binary_search_threshold",
    "classify_boxes",
    "dp_solve",
    "eliminate",
    "eval_dt",
    "eval_msscf",
    "eval_pb",
    "eval_threshold",
    "expand",
    "greedy_dt",
    "greedy_msscf",
    "greedy_threshold",
    "min_finite",
    "mixture_pb_solve",
    "msscf_to_dt",
    "msscf_to_pb",
    "nonadaptive_mssc_order",
    "opt_dt",
    "opt_msscf",
    "opt_mixture_pb",
    "opt_mixture_threshold",
    "opt_pb",
    "opt_threshold",
    "order_policy",
    "pb_phases",
    "pb_phases_uniform",
    "pb_to_pbt_naive",
    "pbt_to_umsscf",
    "pipeline_pb_direct",
    "pipeline_pb_via_udt",
    "render_policy",
    "require_valid",
    "simulate",
    "tv_distance",
    "udt_to_umsscf",
    "update_evidence",
    "validate",
]

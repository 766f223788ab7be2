"""Benchmark handlers and the fixed code that drives them."""

from __future__ import annotations

from .batch_pipeline import PipelineDriver, build_batch_pipeline
from .lpm import InvalidPrefix, LpmDriver, RuleTable, build_lpm, synthetic_addresses, synthetic_rules
from .mmul import MmulDriver, build_mmul
from .streams import Constant, Phase, RequestStream, Uniform, Zipf, gen_stream, zipf_pmf

DEFAULT_LPM_RULES = 1000
DEFAULT_LPM_ADDRESSES = 1000


def make_workload(workload: dict, seed: int):
    """(program, driver) for a config's ``workload`` section."""
    gen = workload["generator"]
    if gen == "mmul":
        return build_mmul(), MmulDriver(seed)
    if gen == "lpm":
        rules = synthetic_rules(workload.get("rules", DEFAULT_LPM_RULES), seed)
        addrs = synthetic_addresses(rules, workload.get("addresses", DEFAULT_LPM_ADDRESSES), seed)
        return build_lpm(rules), LpmDriver(rules, addrs)
    if gen == "pipeline":
        kw = {"items": workload["items"]} if "items" in workload else {}
        return build_batch_pipeline(), PipelineDriver(seed, **kw)
    raise ValueError(f"unknown generator {gen!r}")


__all__ = [
    "build_mmul",
    "MmulDriver",
    "build_lpm",
    "RuleTable",
    "LpmDriver",
    "InvalidPrefix",
    "synthetic_rules",
    "synthetic_addresses",
    "build_batch_pipeline",
    "PipelineDriver",
    "RequestStream",
    "Phase",
    "Constant",
    "Uniform",
    "Zipf",
    "gen_stream",
    "zipf_pmf",
    "make_workload",
]

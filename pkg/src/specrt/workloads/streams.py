"""Deterministic request streams built from phases of parameter distributions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Constant:
    value: object

    def draw(self, rng, size):
        return [self.value] * size


@dataclass(frozen=True)
class Uniform:
    values: tuple

    def draw(self, rng, size):
        idx = rng.integers(len(self.values), size=size)
        return [self.values[i] for i in idx]


def zipf_pmf(n: int, exponent: float) -> np.ndarray:
    """P(rank k) proportional to k^-exponent for k = 1..n."""
    w = np.arange(1, n + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


@dataclass(frozen=True)
class Zipf:
    """Power-law choice over ``keys``: the first key is the most popular."""

    exponent: float
    keys: tuple

    def draw(self, rng, size):
        cdf = np.cumsum(zipf_pmf(len(self.keys), self.exponent))
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return [self.keys[i] for i in idx]


def parse_dist(obj):
    if isinstance(obj, (Constant, Uniform, Zipf)):
        return obj
    if not isinstance(obj, dict):
        return Constant(obj)
    if "constant" in obj:
        return Constant(obj["constant"])
    if "uniform" in obj:
        return Uniform(tuple(obj["uniform"]))
    if "zipf" in obj:
        z = obj["zipf"]
        keys = tuple(z["keys"]) if "keys" in z else tuple(range(z["n"]))
        return Zipf(float(z["exponent"]), keys)
    raise ValueError(f"unknown distribution {obj!r}")


@dataclass(frozen=True)
class Phase:
    calls: int
    params: dict = field(default_factory=dict)  # name -> distribution

    def __post_init__(self):
        if self.calls < 1:
            raise ValueError("a phase needs at least one call")


@dataclass(frozen=True)
class RequestStream:
    generator: str
    seed: int
    phases: tuple

    @classmethod
    def from_config(cls, workload: dict, seed: int | None = None) -> "RequestStream":
        phases = tuple(
            Phase(ph["calls"], {k: parse_dist(v) for k, v in ph.get("params", {}).items()})
            for ph in workload["phases"]
        )
        s = workload.get("seed", 0) if seed is None else seed
        return cls(workload["generator"], s, phases)

    @property
    def total_calls(self) -> int:
        return sum(p.calls for p in self.phases)


def gen_stream(spec: RequestStream):
    """Yield one dict of request parameters per call.

    Each phase draws all of its values up front, parameter by parameter in
    name order, from a single generator seeded with ``spec.seed``; the
    sequence therefore depends only on the seed and the schedule.
    """
    rng = np.random.default_rng(spec.seed)
    for phase in spec.phases:
        names = sorted(phase.params)
        cols = [phase.params[n].draw(rng, phase.calls) for n in names]
        for i in range(phase.calls):
            yield {n: _plain(c[i]) for n, c in zip(names, cols)}


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v

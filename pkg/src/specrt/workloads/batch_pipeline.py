"""A three-stage echo pipeline with one batch-size knob per stage.

Each stage copies the payload one step further (inp -> t1 -> t2 -> out)
in batches of ``b_i`` items. The synthetic cost landscape is built from
two constants per stage:

* a fixed per-batch overhead loop of ``BATCH_OVERHEAD`` iterations, which
  favours large batches, and
* a spill penalty loop of ``SPILL_COST`` iterations per item, paid when the
  batch exceeds the stage's ``CAPACITY``.

With these values the cheapest batch size for a stage is its capacity, so
over b_i in {1, 2, 4, 8, 16, 32} the landscape has one optimum,
(CAPACITY[0], CAPACITY[1], CAPACITY[2]). The exact optimum among the
pinned variants is confirmed by brute force in the tests.
"""

from __future__ import annotations

import numpy as np

from ..ir import Program, parse_program

BATCH_SIZES = (1, 2, 4, 8, 16, 32)
CAPACITY = (8, 16, 4)
BATCH_OVERHEAD = 24
SPILL_COST = 40
DEFAULT_ITEMS = 64


def _stage(src: str, dst: str, b: str, cap: int) -> str:
    return f"""\
  (for base 0 n {b}
    (for w 0 {BATCH_OVERHEAD} 1
      (set acc (+ acc w)))
    (for j 0 {b} 1
      (set k (+ base j))
      (store {dst} k (load {src} k))
      (if (> {b} {cap})
        (then
          (for w 0 {SPILL_COST} 1
            (set acc (+ acc 1)))))))"""


PIPELINE_SOURCE = f"""\
; echo through three batched stages; returns the overhead counter
(func pipeline ((inp arr-i64) (out arr-i64) (t1 arr-i64) (t2 arr-i64) (n i64)
                (b1 i64) (b2 i64) (b3 i64))
  (locals (acc i64) (k i64))
  (set acc 0)
{_stage("inp", "t1", "b1", CAPACITY[0])}
{_stage("t1", "t2", "b2", CAPACITY[1])}
{_stage("t2", "out", "b3", CAPACITY[2])}
  (return acc))

(specpoint pipeline b1 config)
(specpoint pipeline b2 config)
(specpoint pipeline b3 config)
"""


def build_batch_pipeline() -> Program:
    return parse_program(PIPELINE_SOURCE)


class PipelineDriver:
    """Pushes one payload of ``items`` values through the pipeline per call.

    Batch sizes come from the runtime when it pins them and from the
    request otherwise. ``items`` must be a multiple of the largest batch.
    """

    function = "pipeline"

    def __init__(self, seed: int = 0, items: int = DEFAULT_ITEMS):
        if items % max(BATCH_SIZES):
            raise ValueError(f"items must be a multiple of {max(BATCH_SIZES)}")
        self.items = items
        rng = np.random.default_rng([seed, items])
        self.payload = rng.integers(-1000, 1000, size=items, dtype=np.int64)
        self.payload.flags.writeable = False

    def args(self, b1: int, b2: int, b3: int) -> list:
        n = self.items
        z = lambda: np.zeros(n, dtype=np.int64)  # noqa: E731
        return [self.payload, z(), z(), z(), n, b1, b2, b3]

    def handle(self, runtime, request: dict):
        bs = []
        for i, name in enumerate(("b1", "b2", "b3")):
            v = runtime.driver_value((self.function, name))
            bs.append(int(request.get(name, 1)) if v is None else v)
        return runtime.call(self.function, self.args(*bs))

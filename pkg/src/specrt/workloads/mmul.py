"""Blocked matrix multiply over tiled (block-major) int64 matrices.

A matrix of size n x n with block size s is stored tile by tile: tile
(bi, bj) occupies s*s consecutive slots starting at ((bi*nb)+bj)*s*s, each
tile row-major. The kernel runs six loops: three over tiles and three
inside a tile, the last two bounded by the block size ``s``.
"""

from __future__ import annotations

import numpy as np

from ..ir import Program, parse_program

MMUL_SOURCE = """\
; c += a * b over tiled n x n matrices with block size s
(func matmul ((a arr-i64) (b arr-i64) (c arr-i64) (n i64) (s i64))
  (locals (nb i64) (ss i64) (abase i64) (bbase i64) (cbase i64) (crow i64) (acc i64))
  (set nb (/ n s))
  (set ss (* s s))
  (for bi 0 nb 1
    (for bj 0 nb 1
      (set cbase (* (+ (* bi nb) bj) ss))
      (for bk 0 nb 1
        (set abase (* (+ (* bi nb) bk) ss))
        (set bbase (* (+ (* bk nb) bj) ss))
        (for arow abase (+ abase ss) s
          (set crow (+ cbase (- arow abase)))
          (for jo 0 s 1
            (set acc (load c (+ crow jo)))
            (for ko 0 s 1
              (set acc (+ acc (* (load a (+ arow ko)) (load b (+ bbase (+ (* ko s) jo)))))))
            (store c (+ crow jo) acc))))))
  (return 0))

(specpoint matmul s workload)
"""


def build_mmul(n: int | None = None) -> Program:
    """The matmul handler program. ``n`` is only checked, the IR is size-generic."""
    if n is not None and n < 1:
        raise ValueError("matrix dimension must be >= 1")
    return parse_program(MMUL_SOURCE)


def to_tiled(m: np.ndarray, s: int) -> np.ndarray:
    n = m.shape[0]
    if n % s:
        raise ValueError(f"block size {s} does not divide {n}")
    nb = n // s
    return np.ascontiguousarray(
        m.reshape(nb, s, nb, s).transpose(0, 2, 1, 3).reshape(-1)).astype(np.int64)


def from_tiled(flat: np.ndarray, n: int, s: int) -> np.ndarray:
    nb = n // s
    return flat.reshape(nb, nb, s, s).transpose(0, 2, 1, 3).reshape(n, n)


def make_matrices(n: int, seed: int, lo: int = -8, hi: int = 9):
    rng = np.random.default_rng([seed, n])
    a = rng.integers(lo, hi, size=(n, n), dtype=np.int64)
    b = rng.integers(lo, hi, size=(n, n), dtype=np.int64)
    return a, b


class MmulDriver:
    """Fixed code for the matmul benchmark.

    Each request carries (n, s). Input matrices are generated once per n
    from the seed and re-tiled per block size; the output buffer is fresh
    for every call. When the runtime pins ``s`` on a driver-coupled point the
    driver adopts that value instead of the request's.
    """

    function = "matmul"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._inputs = {}
        self._tiled = {}

    def inputs(self, n: int, s: int):
        key = (n, s)
        if key not in self._tiled:
            if n not in self._inputs:
                self._inputs[n] = make_matrices(n, self.seed)
            a, b = self._inputs[n]
            ta, tb = to_tiled(a, s), to_tiled(b, s)
            ta.flags.writeable = False
            tb.flags.writeable = False
            self._tiled[key] = (ta, tb)
        return self._tiled[key]

    def args(self, n: int, s: int) -> list:
        a, b = self.inputs(n, s)
        return [a, b, np.zeros(n * n, dtype=np.int64), n, s]

    def handle(self, runtime, request: dict):
        n = int(request["n"])
        s = runtime.driver_value((self.function, "s"))
        if s is None:
            s = int(request["s"])
        return runtime.call(self.function, self.args(n, s))

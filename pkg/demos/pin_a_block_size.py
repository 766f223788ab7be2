"""Pin the block size of a tiled matrix multiply and watch the op count fall.

Run: python demos/pin_a_block_size.py
"""

from specrt.engine import Engine
from specrt.ir import format_function
from specrt.specializer import PinSet, pin_and_specialize
from specrt.workloads.mmul import MmulDriver, build_mmul

program = build_mmul()
engine = Engine(program)
driver = MmulDriver(seed=0)

variant = pin_and_specialize(program, PinSet.of("matmul", {"s": 4}))
print(f"built {variant.variant_id}; pass log (nodes before -> after):")
for name, before, after in variant.pass_log:
    print(f"  {name:<16} {before:>5} -> {after}")

generic = engine.call("matmul", driver.args(16, 4))
pinned = engine.call("matmul", driver.args(16, 4), variant)
print(f"\n16x16 product, s=4: generic {generic.ops} ops, pinned {pinned.ops} ops "
      f"({pinned.ops / generic.ops:.3f}x)")

# a caller that breaks the pin pays for the guard and runs the generic code
wrong = engine.call("matmul", driver.args(16, 8), variant)
print(f"called with s=8: guard_failed={wrong.guard_failed}, ops={wrong.ops}")

print("\nthe innermost loops after specialization:")
print("\n".join(format_function(variant.code).splitlines()[:14]))

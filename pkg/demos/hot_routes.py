"""Hard-code the hottest destinations of a router, then change its rules.

Run: python demos/hot_routes.py   (a few seconds with a C compiler)
"""

import numpy as np

from specrt.bench import updated_rules
from specrt.runtime import runtime_init
from specrt.workloads import LpmDriver, Zipf, build_lpm, synthetic_addresses, synthetic_rules

rules = synthetic_rules(500, seed=1)
driver = LpmDriver(rules, synthetic_addresses(rules, 500, seed=1))
rt = runtime_init(build_lpm(rules), {"backend": "auto", "window_calls": 2000})
keys = Zipf(1.2, tuple(range(500))).draw(np.random.default_rng(1), 6000)


def serve(batch):
    ops = fallbacks = 0
    for key in batch:
        r = driver.handle(rt, {"key": key})
        assert r.value == driver.table.lookup(driver.addresses[key])
        ops += r.ops
        fallbacks += r.guard_failed
    return ops / len(batch), fallbacks


before, _ = serve(keys[:2000])
v = rt.install_hot_map("lpm", "addr", 8, driver.template)  # re-read after table swaps
with_map, _ = serve(keys[2000:4000])
print(f"generic {before:.0f} ops/packet, with {v.variant_id}: {with_map:.0f} "
      f"({1 - with_map / before:.1%} fewer)")

driver.update_rules(rt, updated_rules(rules))
after, fallbacks = serve(keys[4000:])
print(f"after the rule update every packet falls back ({fallbacks}/2000) and routes stay correct")
rt.update_runtime()
rebuilt, _ = serve(keys[4000:])
print(f"update_runtime rebuilds the map for the new table: {rebuilt:.0f} ops/packet")

"""Walk a runtime handle through its hooks by hand.

Run: python demos/drive_the_hooks.py
"""

from specrt.runtime import runtime_init

SOURCE = """
(func scale ((x i64) (k i64))
  (locals (t i64))
  (set t 0)
  (for i 0 k 1 (set t (+ t x)))
  (return t))
(specpoint scale k workload)
"""

rt = runtime_init(SOURCE)
point = ("scale", "k")

for k in (3, 3, 3, 5):
    rt.call("scale", [7, k])
print("observed k:", rt.profiles[point].top_k(2))

hot = rt.profiles[point].top_k(1)[0][0]
rt.point_specialize(point, hot)
print("after pinning:", rt.get_specialized_function("scale"))
print("  k=3 ->", rt.call("scale", [7, 3]))
print("  k=5 ->", rt.call("scale", [7, 5]), "(guard failed, generic answered)")

rt.point_disable_spec_check(point)
print("guard removed; k=5 now returns", rt.call("scale", [7, 5]).value, "because the pin is trusted")
rt.point_disable_spec(point)
print("unpinned:", rt.get_specialized_function("scale"))

print("\nhook log:")
for event, detail in rt.events:
    print(f"  {event:<26} {detail}")

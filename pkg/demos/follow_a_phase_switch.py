"""Let the explorer pick a block size, then change the matrix size under it.

Runs the shipped mmul scenario (20,000 calls; about 10-20 s with a C compiler).
Run: python demos/follow_a_phase_switch.py
"""

from pathlib import Path

from specrt.bench import run_config
from specrt.config import load_config

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "mmul_phase_switch.json")
result = run_config(cfg)

print("exploration trace (window, event, config):")
for e in result.runtime.trace:
    if e.event != "install" or e.action != "install":
        print(f"  {e.window_id:>4}  {e.event:<8} {e.config_id}")
    else:
        print(f"  {e.window_id:>4}  try      {e.config_id}")
print()
print(result.summary, end="")

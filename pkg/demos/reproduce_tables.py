"""Rerun the bundled table manifest at a chosen scale and compare with the stored cells.

    python demos/reproduce_tables.py            # S1 and S5 at 2000 replicates
    python demos/reproduce_tables.py S3 500

The same numbers come from ``maxcon simulate --manifest --tables S1 --reps 2000``.
"""
import sys
import time

from maxcon.cli import load_manifest, manifest_scenarios
from maxcon.simulate import SIM_METHODS, ScenarioConfig, run_scenario

tables = set(sys.argv[1].split(",")) if len(sys.argv) > 1 else {"S1", "S5"}
reps = int(sys.argv[2]) if len(sys.argv) > 2 else 2000

t0 = time.perf_counter()
worst = 0.0
print(f"{'table':<6}{'maf':>5}{'n':>5} {'pattern':<10}{'delta':>6} {'method':<6}{'rate':>7}{'ref':>7}")
for (table, maf, n, pattern, delta), cells in manifest_scenarios(load_manifest(), tables):
    methods = tuple(m for m in SIM_METHODS if any(c["method"] == m for c in cells))
    res = run_scenario(ScenarioConfig(maf=maf, n_total=n, pattern=pattern, delta=delta,
                                      methods=methods, reps=reps))
    for c in cells:
        ours = res[c["method"]].r_p
        ref = c.get("fp", c.get("r_p"))
        worst = max(worst, abs(ours - ref))
        print(f"{table:<6}{maf:>5}{n:>5} {pattern:<10}{delta:>6} {c['method']:<6}{ours:>7.3f}{ref:>7.3f}")
print(f"\nmax |diff| {worst:.3f} at {reps} replicates, {time.perf_counter() - t0:.0f}s")

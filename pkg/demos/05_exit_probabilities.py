"""Exit probabilities of the weighted remainder for a small ensemble.

Runs the configuration in ensemble.toml through the harness, then evaluates
the stability exit time at several thresholds from the same trajectories.
Smaller noise and larger thresholds both make exits rarer.
"""
import sys
from pathlib import Path

import numpy as np

from skdv.harness import load_config, simulate_ensemble, summarize, write_outputs
from skdv.modulation import exit_times

here = Path(__file__).parent
out = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "out_exit"
base = load_config(here / "ensemble.toml")
etas = (0.02, 0.04, 0.06, 0.08)
for sigma in (0.02, 0.01):
    raw = {**base.raw, "noise": {**base.raw["noise"], "sigma": sigma}}
    cfg = type(base).from_dict(raw)
    recs = simulate_ensemble(cfg)
    stats = summarize(recs, cfg)
    write_outputs(stats, recs, out / f"sigma_{sigma}", cfg)
    T = cfg.sim.t_end
    probs = [np.mean([exit_times(r, {"eta_H1w": e}, cfg.window).t_st <= T + 1e-9 for r in recs])
             for e in etas]
    print(f"sigma={sigma}: " + ", ".join(f"P[t_st<T | eta={e}]={p:.2f}" for e, p in zip(etas, probs)))
    print(f"  summary: {stats.summary()}")

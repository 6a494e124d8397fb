"""Pre-build the acceptance suite's batch archives (same cache keys)."""

import sys
import time

sys.path.insert(0, "tests")

from test_acceptance import (BHW_GRAPE, BHW_SA, _cached_batch, mixture_plan)
from qmoves.grape import GrapeConfig
from qmoves.problems import T_QSL99_MS, make_problem_ms
from qmoves.stochastic import SaConfig


def main():
    t_start = time.time()

    def stamp(name):
        print(f"[{time.time() - t_start:7.0f}s] {name} done", flush=True)

    n_t = make_problem_ms("bhw", 0.1057).n_t

    # run-time ordering first: shared RS seeds, three methods per level
    budgets = {"bhw": 75.0, "splitting": 45.0, "shakeup": 45.0}
    for level in ("bhw", "splitting", "shakeup"):
        t_ms = T_QSL99_MS[level]
        for method, config in (
                ("grape", GrapeConfig(wall_budget=1e9)),
                ("sa_nt", SaConfig(wall_budget=1e9)),
                ("sa_40", SaConfig(n_b=40, wall_budget=1e9))):
            kind = "sa" if method.startswith("sa") else "grape"
            _cached_batch(f"rt_{level}_{method}", level, t_ms, kind, config,
                          ["rs"] * 20, min_budget=budgets[level], master_seed=150)
            stamp(f"rt_{level}_{method}")

    _cached_batch("split_rs", "splitting", 1.1 * T_QSL99_MS["splitting"], "grape",
                  GrapeConfig(wall_budget=1e9), ["rs"] * 30,
                  min_budget=120.0, master_seed=130)
    stamp("split_rs")

    import numpy as np
    ts = np.linspace(0.4, 1.05, 10)
    for i, t in enumerate(ts):
        plan = ["rs"] * 10 + [24] * 10
        _cached_batch(f"shake_{int(t * 1e3)}", "shakeup", float(t), "grape",
                      GrapeConfig(wall_budget=1e9), plan, min_budget=40.0,
                      master_seed=140 + i)
        stamp(f"shake_{int(t*1e3)}")

    _cached_batch("t1057_low", "bhw", 0.1057, "grape", BHW_GRAPE,
                  mixture_plan(140, 0, 0, n_t), min_budget=100.0, master_seed=101)
    stamp("t1057_low")
    _cached_batch("t1057_high", "bhw", 0.1057, "grape", BHW_GRAPE,
                  mixture_plan(0, 30, 30, n_t), min_budget=40.0, master_seed=105)
    stamp("t1057_high")
    _cached_batch("t1057_sa", "bhw", 0.1057, "sa", BHW_SA, ["rs"] * 50,
                  min_budget=75.0, master_seed=102)
    stamp("t1057_sa")
    _cached_batch("t0973_low", "bhw", 0.0973, "grape", BHW_GRAPE,
                  mixture_plan(100, 0, 0, n_t), min_budget=90.0, master_seed=103)
    stamp("t0973_low")
    _cached_batch("t0973_high", "bhw", 0.0973, "grape", BHW_GRAPE,
                  mixture_plan(0, 12, 8, n_t), min_budget=40.0, master_seed=106)
    stamp("t0973_high")
    _cached_batch("t0973_sa", "bhw", 0.0973, "sa", BHW_SA, ["rs"] * 20,
                  min_budget=75.0, master_seed=104)
    stamp("t0973_sa")

    for i, t in enumerate((0.080, 0.085, 0.090, 0.095, 0.101, 0.109, 0.113, 0.117)):
        nt = make_problem_ms("bhw", t).n_t
        _cached_batch(f"support_{int(t * 1e4)}", "bhw", t, "grape", BHW_GRAPE,
                      mixture_plan(10, 3, 3, nt), min_budget=45.0,
                      master_seed=110 + i)
        stamp(f"support_{int(t*1e4)}")

    nt45 = make_problem_ms("bhw", 0.1045).n_t
    for nb, master in ((2, 120), (4, 121), (nt45, 122)):
        _cached_batch(f"t1045_nb{nb}", "bhw", 0.1045, "grape", BHW_GRAPE,
                      [nb] * 300, min_budget=30.0, master_seed=master)
        stamp(f"t1045_nb{nb}")

    print(f"all archives ready in {time.time() - t_start:.0f} s", flush=True)


if __name__ == "__main__":
    main()

"""Compiled vs pure-Python channel kernel.

Two measurements per backend: a synthetic medium workload (random
backoff / transmit / end cycles on the 100-node grid's sensing graph) and
one complete simulation run. Usage::

    python3 benchmarks/bench_channel.py [--runs 3] [--sim-time 30]
"""

from __future__ import annotations

import argparse
import random
import time

from jitsim import _channel_py
from jitsim.channel import Medium
from jitsim.config import SimConfig
from jitsim.network import simulate
from jitsim.radio import neighbor_table
from jitsim.scenarios import build_topology

try:
    from jitsim import _channel as _compiled
except ImportError:
    _compiled = None


def medium_workload(backend, ops: int = 200_000, seed: int = 1) -> float:
    topo = build_topology("grid")
    sense = [[j for j, _ in row] for row in neighbor_table(topo.positions, 550.0)]
    m = Medium(sense, 20, 50, backend=backend)
    rng = random.Random(seed)
    now, active = 0, set()
    t0 = time.perf_counter()
    for _ in range(ops):
        node = rng.randrange(m.n)
        now += rng.randrange(1, 40)
        if node in active:
            m.end(now, node)
            active.discard(node)
        elif rng.random() < 0.5:
            m.begin(now, node, sense[node][0] if sense[node] else -1)
            active.add(node)
        else:
            m.backoff(now, node, rng.randrange(32))
        m.next_expiry()
    return time.perf_counter() - t0


def sim_run(backend, sim_time: float) -> float:
    cfg = SimConfig(policy="jits_d", routing="sp", sim_time_s=sim_time, drain_s=5.0)
    t0 = time.perf_counter()
    simulate(cfg, backend=backend)
    return time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--sim-time", type=float, default=30.0)
    args = ap.parse_args()
    backends = [("python", _channel_py)]
    if _compiled is not None:
        backends.insert(0, ("cython", _compiled))
    else:
        print("compiled kernel not built; timing the fallback only")
    best = {}
    for name, mod in backends:
        med = min(medium_workload(mod) for _ in range(args.runs))
        sim = min(sim_run(mod, args.sim_time) for _ in range(args.runs))
        best[name] = (med, sim)
        print(f"{name:7s} medium workload {med:7.3f} s   simulation ({args.sim_time:g} s) {sim:7.3f} s")
    if len(best) == 2:
        (cm, cs), (pm, ps) = best["cython"], best["python"]
        print(f"speedup  medium x{pm / cm:.1f}   simulation x{ps / cs:.1f}")


if __name__ == "__main__":
    main()

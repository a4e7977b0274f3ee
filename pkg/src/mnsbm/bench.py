"""Backend benchmark: identical chains on both kernels, timed and compared.

The two backends promise bit-identical output, so besides the timing the
benchmark serializes both traces and checks byte equality; a mismatch means
the kernels have drifted apart and is an error, not a statistic.
"""

from __future__ import annotations

import io
import time

from . import kernels, rng as rngmod, synth_gen
from .graph_io import split_holdout
from .superposition import SweepConfig, run_chain
from .trace import write_trace


def run_benchmark(n=120, k=3, s=2, iterations=40, seed=7, holdout=0.05):
    """Time run_chain per available backend on one planted instance."""
    m = n // (4 * k)  # mid-range overlap
    pm = synth_gen.planted_params(n, k, m)
    g, _ = synth_gen.generate(pm, rngmod.stream(seed, rngmod.GENERATE))
    g_train, heldout = split_holdout(g, holdout, rngmod.stream(seed, rngmod.HOLDOUT))
    cfg = SweepConfig(iterations=iterations, burn_in=max(0, iterations // 2),
                      thinning=1, master_seed=seed)

    results = {}
    payloads = {}
    for name in kernels.available_backends():
        kern = kernels.select_backend(name)
        t0 = time.perf_counter()
        trace = run_chain(g_train, heldout, s, cfg, kern=kern)
        seconds = time.perf_counter() - t0
        buf = io.StringIO()
        write_trace(trace, buf)
        payloads[name] = buf.getvalue()
        results[name] = {
            "seconds": seconds,
            "per_sweep_ms": 1e3 * seconds / iterations,
        }

    identical = None
    speedup = None
    if len(payloads) == 2:
        texts = list(payloads.values())
        identical = texts[0] == texts[1]
        speedup = (results["python"]["seconds"] / results["c"]["seconds"]
                   if "c" in results else None)
    return {
        "n": n, "k": k, "S": s, "iterations": iterations, "seed": seed,
        "edges": g_train.edge_count,
        "results": results,
        "identical": identical,
        "speedup": speedup,
    }

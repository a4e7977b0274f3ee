"""Planted two-subnetwork instances with controllable overlap.

Both subnetworks partition the vertices 0..N-1 into K contiguous blocks of
size N/K; the second subnetwork's block boundaries are circularly shifted
by m vertices. The overlap parameter lambda_shift = 2Km/N runs from 0
(identical partitions) to 1 (maximal shift m = N/(2K)). Exactly mK
vertices sit in different blocks across the two subnetworks.

Counts are drawn independently per dyad and subnetwork from the planted
rates; the observed graph keeps a dyad iff the summed count is positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .graph_io import ObservedGraph

DIAG_RATES = (1.0, 1.5)
OFFDIAG_RATE = 0.1


@dataclass(frozen=True)
class PlantedModel:
    n: int
    k: int
    m: int
    z1: tuple
    z2: tuple
    eta1: np.ndarray
    eta2: np.ndarray
    lambda_shift: float


@dataclass(frozen=True)
class GroundTruth:
    """Planted assignments plus per-subnetwork counts on realized edges."""

    n: int
    zs: tuple  # per subnetwork, a length-n tuple of block labels
    dyads: tuple  # realized edges (i, j), i < j, sorted
    counts: tuple  # per dyad, a tuple of per-subnetwork counts

    def total(self, k):
        return sum(self.counts[k])


def _block_rates(k, diag):
    eta = np.full((k, k), OFFDIAG_RATE, dtype=np.float64)
    np.fill_diagonal(eta, diag)
    return eta


def planted_params(n, k, m):
    """Planted model on n vertices, k blocks per subnetwork, shift m."""
    if k < 1 or n < 1 or n % k != 0:
        raise ValueError("n must be a positive multiple of k")
    size = n // k
    if not (0 <= 2 * m * k <= n):
        raise ValueError(f"shift m={m} outside 0..{n // (2 * k)}")
    z1 = tuple(v // size for v in range(n))
    z2 = tuple(((v - m) % n) // size for v in range(n))
    return PlantedModel(
        n=n, k=k, m=int(m), z1=z1, z2=z2,
        eta1=_block_rates(k, DIAG_RATES[0]),
        eta2=_block_rates(k, DIAG_RATES[1]),
        lambda_shift=2.0 * k * m / n,
    )


def shift_for_lambda(n, k, lam):
    """Integer shift m with 2Km/N = lam; rejects grid points between shifts."""
    m = lam * n / (2 * k)
    rounded = round(m)
    if abs(m - rounded) > 1e-9:
        raise ValueError(
            f"lambda={lam} needs shift m={m}, not an integer for n={n}, k={k}")
    return int(rounded)


def overlap_count(pm):
    """Vertices assigned to different blocks by the two subnetworks: mK."""
    return sum(1 for a, b in zip(pm.z1, pm.z2) if a != b)


def generate(pm, rng):
    """Draw both latent count layers and the observed binary graph."""
    n = pm.n
    iu, ju = np.triu_indices(n, 1)
    z1 = np.asarray(pm.z1)
    z2 = np.asarray(pm.z2)
    c1 = rng.poisson(pm.eta1[z1[iu], z1[ju]])
    c2 = rng.poisson(pm.eta2[z2[iu], z2[ju]])
    keep = (c1 + c2) > 0
    dyads = tuple((int(i), int(j)) for i, j in zip(iu[keep], ju[keep]))
    counts = tuple((int(a), int(b)) for a, b in zip(c1[keep], c2[keep]))
    g = ObservedGraph(n=n, dyads=dyads)
    gt = GroundTruth(n=n, zs=(pm.z1, pm.z2), dyads=dyads, counts=counts)
    return g, gt


def write_ground_truth(gt, out_dir):
    """Assignment files ("vertex block") and count files ("i j count")."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for s, z in enumerate(gt.zs, start=1):
        with open(out_dir / f"truth_z{s}.txt", "w") as fh:
            for v, b in enumerate(z):
                fh.write(f"{v} {b}\n")
        with open(out_dir / f"truth_counts{s}.txt", "w") as fh:
            for (i, j), cs in zip(gt.dyads, gt.counts):
                if cs[s - 1] > 0:
                    fh.write(f"{i} {j} {cs[s - 1]}\n")


def read_ground_truth(out_dir, n, s_count=2):
    zs = []
    per_sub = []
    for s in range(1, s_count + 1):
        z = [0] * n
        with open(out_dir / f"truth_z{s}.txt") as fh:
            for line in fh:
                v, b = line.split()
                z[int(v)] = int(b)
        zs.append(tuple(z))
        cmap = {}
        with open(out_dir / f"truth_counts{s}.txt") as fh:
            for line in fh:
                i, j, c = line.split()
                cmap[(int(i), int(j))] = int(c)
        per_sub.append(cmap)
    dyads = sorted(set().union(*per_sub))
    counts = tuple(tuple(cm.get(d, 0) for cm in per_sub) for d in dyads)
    return GroundTruth(n=n, zs=tuple(zs), dyads=tuple(dyads), counts=counts)


def experiment_grid(k_list, lambda_grid, restarts, s_list, cfg):
    """Enumerate the overlap-experiment runs with derived per-run seeds.

    Each (k, lambda, restart) triple shares one generated dataset across all
    fitted S values; n = 20k throughout. `cfg` supplies master_seed,
    iterations, burn_in, thinning. Returns a manifest: a list of run dicts
    consumable by the command-line runner.
    """
    master = int(cfg["master_seed"])
    runs = []
    for ik, k in enumerate(k_list):
        n = 20 * k
        for il, lam in enumerate(lambda_grid):
            m = shift_for_lambda(n, k, lam)
            for r in range(restarts):
                data_seed = rngmod.derive_seed(master, rngmod.EXPERIMENT,
                                               ik, il, r, 0)
                for is_, s in enumerate(s_list):
                    chain_seed = rngmod.derive_seed(master, rngmod.EXPERIMENT,
                                                    ik, il, r, 1 + is_)
                    runs.append({
                        "n": n, "k": k, "m": m, "lambda_shift": lam,
                        "restart": r, "S": s,
                        "data_seed": data_seed, "chain_seed": chain_seed,
                        "iterations": int(cfg["iterations"]),
                        "burn_in": int(cfg["burn_in"]),
                        "thinning": int(cfg["thinning"]),
                    })
    return runs


def write_manifest(runs, path):
    with open(path, "w") as fh:
        json.dump({"runs": runs}, fh, indent=1, sort_keys=True)
        fh.write("\n")

"""Ensemble of S latent subnetworks over one observed binary graph.

The observed adjacency is the Heaviside of the sum of S latent Poisson
multigraphs. A full MCMC sweep runs four phases in a fixed order:

    1. draw each subnetwork's rate matrix from its conditional;
    2. redraw latent counts per training edge (zero-truncated total split
       across subnetworks) and re-impute held-out dyads (untruncated);
    3. collapsed Gibbs sweep over each subnetwork's assignments;
    4. Metropolis-Hastings pass over each subnetwork's hyperparameters.

The rate matrices are regenerated from their full conditional before any
step conditions on them, so collapsing them out of step 3 is valid.

Phases 1, 3, 4 parallelize across subnetworks and phase 2 across dyad
blocks. Every task owns its state slice and its named random stream, so
traces are byte-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels, rng as rngmod
from .graph_io import EMPTY_HELDOUT
from .sbm_kernel import (
    Assignment,
    Hyperparams,
    build_csr,
    count_factorial_term,
    _crp_core,
    mh_three_moves,
    pair_term_sum,
    sample_crp,
)
from .trace import ChainTrace, TraceRecord

RATE_FLOOR = 1e-12  # keeps the truncated sampler defined if an eta draw underflows

SCAN_ORDER = "fixed-0..n-1"


@dataclass(frozen=True)
class SweepConfig:
    iterations: int
    burn_in: int
    thinning: int
    master_seed: int
    parallel_workers: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be positive")


class ChainStreams:
    """Named random streams for one chain.

    One stream per subnetwork (rates, assignments, hyperparameters), one per
    dyad block for edge totals, one per (dyad block, subnetwork) for the
    splits; held-out dyads get their own block streams. Each stream has a
    single owner phase, so consumption is independent of worker scheduling.
    """

    def __init__(self, sub, tot, split, ho_tot, ho_split):
        self.sub = sub
        self.tot = tot
        self.split = split
        self.ho_tot = ho_tot
        self.ho_split = ho_split

    @classmethod
    def create(cls, master_seed, S, n_edge_blocks, n_ho_blocks):
        return cls(
            sub=[rngmod.stream(master_seed, rngmod.SUBNET, s) for s in range(S)],
            tot=[rngmod.stream(master_seed, rngmod.EDGE_TOTAL, b)
                 for b in range(n_edge_blocks)],
            split=[[rngmod.stream(master_seed, rngmod.EDGE_SPLIT, b, s)
                    for s in range(S)] for b in range(n_edge_blocks)],
            ho_tot=[rngmod.stream(master_seed, rngmod.HELDOUT_TOTAL, b)
                    for b in range(n_ho_blocks)],
            ho_split=[[rngmod.stream(master_seed, rngmod.HELDOUT_SPLIT, b, s)
                       for s in range(S)] for b in range(n_ho_blocks)],
        )

    def permute_subnetworks(self, perm):
        """Streams under relabeled subnetworks: new index s draws what old
        index perm[s] would have drawn. Used by the equivariance property."""
        return ChainStreams(
            sub=[self.sub[p] for p in perm],
            tot=self.tot,
            split=[[row[p] for p in perm] for row in self.split],
            ho_tot=self.ho_tot,
            ho_split=[[row[p] for p in perm] for row in self.ho_split],
        )


class SubnetworkState:
    """One latent subnetwork: assignments, capacity-sized statistics, rates.

    `N` counts latent edges per block pair, training plus imputed held-out.
    Imputed held-out dyads are treated as data, so every dyad carries unit
    exposure and the dyad count per pair is the plain occupancy product.
    Rows at and beyond L are kept all-zero.
    """

    def __init__(self, n, alpha, kappa, lambda_rate):
        cap = n + 1
        self.z = np.zeros(n, dtype=np.int64)
        self.occ = np.zeros(cap, dtype=np.int64)
        self.L = 0
        self.N = np.zeros((cap, cap), dtype=np.int64)
        self.alpha = float(alpha)
        self.kappa = float(kappa)
        self.lambda_rate = float(lambda_rate)
        self.eta = None  # (L, L) after the rate phase

    def set_assignment(self, assign):
        self.z[:] = assign.z
        self.occ.fill(0)
        self.occ[:assign.L] = assign.n_l
        self.L = assign.L

    def assignment(self):
        return Assignment(z=self.z.copy(), L=self.L, n_l=self.occ[:self.L].copy())

    def pair_exposure(self):
        """Dyads per block pair: occupancy products, like-pairs C(n_l, 2)."""
        L = self.L
        occ = self.occ[:L]
        M = np.outer(occ, occ)
        np.fill_diagonal(M, occ * (occ - 1) // 2)
        return M


class EnsembleState:
    """S subnetworks plus the latent per-dyad counts and their rng streams."""

    def __init__(self, observed, heldout, S, master_seed, kern=None,
                 init_hyperparams=(2.0, 2.0, 2.0), init_assignments=None,
                 streams=None):
        if S < 1:
            raise ValueError("S must be at least 1")
        heldout = EMPTY_HELDOUT if heldout is None else heldout
        self.observed = observed
        self.heldout = heldout
        self.S = int(S)
        self.n = observed.n
        self.master_seed = int(master_seed)
        self.kern = kernels.get_backend() if kern is None else kern
        self.update_hyperparams = True

        overlap = set(observed.dyads) & heldout.pair_set()
        if overlap:
            raise ValueError(f"held-out dyads overlap training edges: {sorted(overlap)[:3]}")

        self.ei = np.asarray([d[0] for d in observed.dyads], dtype=np.int64)
        self.ej = np.asarray([d[1] for d in observed.dyads], dtype=np.int64)
        ho = sorted(heldout.pair_set())
        self.hi = np.asarray([d[0] for d in ho], dtype=np.int64)
        self.hj = np.asarray([d[1] for d in ho], dtype=np.int64)
        self.counts = np.zeros((self.S, len(self.ei)), dtype=np.int64)
        self.ho_counts = np.zeros((self.S, len(self.hi)), dtype=np.int64)
        # held-out counts are kept in sorted-dyad order; this maps them back
        # to the HeldoutSet listing (positives first)
        pos = {d: k for k, d in enumerate(ho)}
        self._ho_out = np.asarray([pos[(i, j)] for i, j, _ in heldout.dyads],
                                  dtype=np.int64)

        self.adj = build_csr(self.n, self.ei, self.ej)
        self.ho_adj = build_csr(self.n, self.hi, self.hj)

        block = rngmod.DYAD_BLOCK
        self.edge_blocks = [(lo, min(lo + block, len(self.ei)))
                            for lo in range(0, len(self.ei), block)]
        self.ho_blocks = [(lo, min(lo + block, len(self.hi)))
                          for lo in range(0, len(self.hi), block)]

        if streams is None:
            streams = ChainStreams.create(self.master_seed, self.S,
                                          len(self.edge_blocks), len(self.ho_blocks))
        self.streams = streams

        a0, k0, l0 = init_hyperparams
        self.subs = [SubnetworkState(self.n, a0, k0, l0) for _ in range(self.S)]
        for s, sub in enumerate(self.subs):
            if init_assignments is not None:
                assign = Assignment.from_labels(init_assignments[s])
                if assign.n != self.n:
                    raise ValueError("init assignment length must equal n")
            else:
                # initial partition from the assignment prior at concentration 1
                assign = sample_crp(self.n, 1.0, streams.sub[s])
            sub.set_assignment(assign)

        # each observed edge starts with one latent edge, placed by an
        # equal-rate race across the per-subnetwork split streams
        for b, (lo, hi) in enumerate(self.edge_blocks):
            gens = streams.split[b]
            for d in range(lo, hi):
                best = 0
                best_e = math.inf
                for s in range(self.S):
                    u = gens[s].random()
                    e = -math.log1p(-u)
                    if e < best_e:
                        best_e = e
                        best = s
                self.counts[best, d] = 1

        self._scratch_z = np.zeros((self.S, self.n), dtype=np.int64)
        recount_stats(self)

    def heldout_totals(self):
        """Imputed totals summed over subnetworks, in HeldoutSet order."""
        return self.ho_counts.sum(axis=0)[self._ho_out]


def recount_stats(ens):
    """Rebuild every subnetwork's N from the current counts."""
    for s, sub in enumerate(ens.subs):
        sub.N.fill(0)
        _scatter_counts(sub.N, sub.z, ens.ei, ens.ej, ens.counts[s])
        _scatter_counts(sub.N, sub.z, ens.hi, ens.hj, ens.ho_counts[s])
        sub.N += np.tril(sub.N.T, -1)


def _scatter_counts(mat, z, ai, aj, vals):
    if len(ai):
        zi = z[ai]
        zj = z[aj]
        lo = np.minimum(zi, zj)
        hi = np.maximum(zi, zj)
        np.add.at(mat, (lo, hi), vals)


def _run_tasks(pool, tasks):
    if pool is None or len(tasks) <= 1:
        for t in tasks:
            t()
    else:
        futures = [pool.submit(t) for t in tasks]
        for f in futures:
            f.result()


def total_rate(ens, dyad):
    """Sum of per-subnetwork rates at the dyad, floored, added in sorted order.

    Sorting makes the float sum invariant under subnetwork relabeling.
    """
    i, j = dyad
    rates = []
    for sub in ens.subs:
        r = float(sub.eta[sub.z[i], sub.z[j]])
        rates.append(r if r > RATE_FLOOR else RATE_FLOOR)
    total = 0.0
    for r in sorted(rates):
        total += r
    return total


def sample_total_count(a_star, eta_ij, rng, kern=None):
    """Total latent count on one dyad: Dirac 0 when the observed entry is 0,
    zero-truncated Poisson when the observed edge is present."""
    if eta_ij <= 0.0:
        raise ValueError("total rate must be positive")
    if a_star not in (0, 1):
        raise ValueError("a_star must be 0 or 1")
    if a_star == 0:
        return 0
    kern = kernels.get_backend() if kern is None else kern
    return kern.ztp_draw(rng, float(eta_ij))


def split_count(total, rates, rng):
    """Multinomial split of `total` across components, p_s proportional to rates.

    Realized as an exponential race: per trial every component draws one
    uniform (fixed consumption) and the smallest exponential wins.
    """
    if len(rates) == 0:
        raise ValueError("rates must be nonempty")
    if any(r <= 0 for r in rates):
        raise ValueError("rates must be positive")
    if total < 0:
        raise ValueError("total must be nonnegative")
    out = [0] * len(rates)
    for _ in range(int(total)):
        best = 0
        best_e = math.inf
        for s, r in enumerate(rates):
            u = rng.random()
            e = -math.log1p(-u) / r
            if e < best_e:
                best_e = e
                best = s
        out[best] += 1
    return out


def _pack_rates(ens):
    lmax = max(sub.L for sub in ens.subs)
    etas = np.zeros((ens.S, lmax, lmax), dtype=np.float64)
    for s, sub in enumerate(ens.subs):
        etas[s, :sub.L, :sub.L] = sub.eta
        ens._scratch_z[s, :] = sub.z
    return etas, ens._scratch_z


def resample_edges(ens, streams=None, pool=None, recount=True):
    """Redraw all training-edge counts given the current rates.

    Totals are zero-truncated so the Heaviside constraint holds by
    construction; unlisted (zero) dyads keep all-zero counts.
    """
    streams = ens.streams if streams is None else streams
    etas, z2d = _pack_rates(ens)
    kern = ens.kern
    tasks = []
    for b, (lo, hi) in enumerate(ens.edge_blocks):
        tasks.append(lambda b=b, lo=lo, hi=hi: kern.resample_block(
            ens.ei, ens.ej, ens.counts, z2d, etas, lo, hi, True,
            streams.tot[b], streams.split[b]))
    _run_tasks(pool, tasks)
    if recount:
        recount_stats(ens)
    return ens


def impute_heldout_counts(ens, rng=None, streams=None, pool=None, recount=True):
    """Redraw held-out dyad counts from the unconstrained conditional.

    Totals are plain Poisson at the summed rate, split by the same race as
    training edges. With `rng` given, every dyad draws sequentially from
    that one stream; otherwise the named per-block streams are used.
    """
    etas, z2d = _pack_rates(ens)
    kern = ens.kern
    if rng is not None:
        if len(ens.hi):
            kern.resample_block(ens.hi, ens.hj, ens.ho_counts, z2d, etas,
                                0, len(ens.hi), False, rng, [rng] * ens.S)
    else:
        streams = ens.streams if streams is None else streams
        tasks = []
        for b, (lo, hi) in enumerate(ens.ho_blocks):
            tasks.append(lambda b=b, lo=lo, hi=hi: kern.resample_block(
                ens.hi, ens.hj, ens.ho_counts, z2d, etas, lo, hi, False,
                streams.ho_tot[b], streams.ho_split[b]))
        _run_tasks(pool, tasks)
    if recount:
        recount_stats(ens)
    return ens


def _phase_eta(ens, streams, pool):
    kern = ens.kern

    def draw(s):
        sub = ens.subs[s]
        gen = streams.sub[s]
        L = sub.L
        M = sub.pair_exposure()
        eta = np.empty((L, L), dtype=np.float64)
        for l in range(L):
            for m in range(l, L):
                v = kern.gamma_draw(gen, float(sub.N[l, m]) + sub.kappa,
                                    float(M[l, m]) + sub.lambda_rate)
                eta[l, m] = v
                eta[m, l] = v
        sub.eta = eta

    _run_tasks(pool, [lambda s=s: draw(s) for s in range(ens.S)])


def _phase_z(ens, streams, pool):
    kern = ens.kern
    indptr, nbr, didx = ens.adj
    ho_indptr, ho_nbr, ho_didx = ens.ho_adj

    def sweep(s):
        sub = ens.subs[s]
        sub.L = kern.gibbs_sweep_z(
            sub.z, sub.occ, sub.L, sub.N,
            ens.counts[s], ens.ho_counts[s],
            indptr, nbr, didx, ho_indptr, ho_nbr, ho_didx,
            sub.alpha, sub.kappa, sub.lambda_rate, streams.sub[s])

    _run_tasks(pool, [lambda s=s: sweep(s) for s in range(ens.S)])


def _phase_hyper(ens, streams, pool):
    kern = ens.kern

    def move(s):
        sub = ens.subs[s]
        hp = Hyperparams(sub.alpha, sub.kappa, sub.lambda_rate)
        hp = mh_three_moves(ens.n, sub.occ[:sub.L], sub.N[:sub.L, :sub.L],
                            sub.pair_exposure(), hp, streams.sub[s], kern)
        sub.alpha = hp.alpha
        sub.kappa = hp.kappa
        sub.lambda_rate = hp.lambda_rate

    _run_tasks(pool, [lambda s=s: move(s) for s in range(ens.S)])


def full_sweep(ens, streams=None, pool=None):
    """One sweep: rates, edge counts (and held-out imputation), assignments,
    hyperparameters. Identical results for any worker count at fixed seed."""
    streams = ens.streams if streams is None else streams
    _phase_eta(ens, streams, pool)
    resample_edges(ens, streams=streams, pool=pool, recount=False)
    impute_heldout_counts(ens, streams=streams, pool=pool, recount=False)
    recount_stats(ens)
    _phase_z(ens, streams, pool)
    if ens.update_hyperparams:
        _phase_hyper(ens, streams, pool)
    return ens


def joint_log_density(ens):
    """log p(z, counts | hyperparameters) up to a constant. Imputed held-out
    counts are part of the state, so they enter both N and the exposure."""
    lg = ens.kern.lgamma
    parts = []
    for s, sub in enumerate(ens.subs):
        L = sub.L
        parts.append(_crp_core(ens.n, sub.occ[:L], sub.alpha, lg))
        parts.append(pair_term_sum(sub.N[:L, :L], sub.pair_exposure(),
                                   sub.kappa, sub.lambda_rate, lg))
        parts.append(count_factorial_term(ens.counts[s], lg))
        parts.append(count_factorial_term(ens.ho_counts[s], lg))
    return math.fsum(parts)


def run_chain(g, heldout, S, cfg, update_hyperparams=True, tracked_dyads=None,
              init_hyperparams=(2.0, 2.0, 2.0), init_assignments=None, kern=None):
    """Run T full sweeps and record every `thinning`-th post-burn-in state.

    Interruption (SIGINT) stops sweeping early; the records collected so far
    are returned in a well-formed trace.
    """
    ens = EnsembleState(g, heldout, S, cfg.master_seed, kern=kern,
                        init_hyperparams=init_hyperparams,
                        init_assignments=init_assignments)
    ens.update_hyperparams = bool(update_hyperparams)

    tracked_idx = None
    if tracked_dyads is not None:
        pos = {d: k for k, d in enumerate(g.dyads)}
        tracked_idx = []
        for d in tracked_dyads:
            d = (int(d[0]), int(d[1]))
            if d not in pos:
                raise ValueError(f"tracked dyad {d} is not a training edge")
            tracked_idx.append(pos[d])
        tracked_idx = np.asarray(tracked_idx, dtype=np.int64)

    pool = None
    records = []
    try:
        if cfg.parallel_workers > 1:
            pool = ThreadPoolExecutor(max_workers=cfg.parallel_workers)
        try:
            for t in range(1, cfg.iterations + 1):
                full_sweep(ens, pool=pool)
                if t <= cfg.burn_in or (t - cfg.burn_in - 1) % cfg.thinning != 0:
                    continue
                tracked = None
                if tracked_idx is not None:
                    tracked = tuple(tuple(int(c) for c in ens.counts[s, tracked_idx])
                                    for s in range(ens.S))
                records.append(TraceRecord(
                    t=t,
                    logp=joint_log_density(ens),
                    z=tuple(tuple(int(v) for v in sub.z) for sub in ens.subs),
                    L=tuple(sub.L for sub in ens.subs),
                    alpha=tuple(sub.alpha for sub in ens.subs),
                    kappa=tuple(sub.kappa for sub in ens.subs),
                    lambda_rate=tuple(sub.lambda_rate for sub in ens.subs),
                    heldout_totals=tuple(int(v) for v in ens.heldout_totals()),
                    tracked_counts=tracked,
                ))
        except KeyboardInterrupt:
            pass
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    return ChainTrace(
        n=ens.n,
        S=ens.S,
        iterations=cfg.iterations,
        burn_in=cfg.burn_in,
        thinning=cfg.thinning,
        master_seed=cfg.master_seed,
        scan=SCAN_ORDER,
        update_hyperparams=ens.update_hyperparams,
        heldout=tuple((int(i), int(j), int(lab)) for i, j, lab in ens.heldout.dyads),
        tracked_dyads=None if tracked_dyads is None
        else tuple((int(i), int(j)) for i, j in tracked_dyads),
        records=tuple(records),
    )

"""Held-out link prediction and structure-recovery scoring.

Link scores are MCMC averages of the Heaviside of imputed held-out totals.
AUC is computed exactly from integer rank statistics (midrank ties), so it
matches an all-pairs comparison bit for bit. Structure recovery compares,
per realized true edge, the planted same-block indicator a_k against the
chain's count-weighted same-block estimate w_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .superposition import impute_heldout_counts


def impute_heldout(ens, rng=None):
    """Redraw imputed counts on all held-out dyads given the current rates.

    Totals are untruncated Poisson at the dyad's total rate, split across
    subnetworks multinomially. With `rng` the draws are sequential from that
    stream; otherwise the ensemble's named held-out streams are used.
    """
    return impute_heldout_counts(ens, rng=rng)


@dataclass(frozen=True)
class PredictionTable:
    """One row per held-out dyad: endpoints, true label, score in [0, 1]."""

    rows: tuple

    def __post_init__(self):
        for i, j, label, score in self.rows:
            if label not in (0, 1):
                raise ValueError("labels must be 0 or 1")
            if not (0.0 <= score <= 1.0):
                raise ValueError("scores must lie in [0, 1]")
            if not (0 <= i < j):
                raise ValueError("rows must hold ordered dyads")

    @property
    def labels(self):
        return tuple(r[2] for r in self.rows)

    @property
    def scores(self):
        return tuple(r[3] for r in self.rows)

    def to_csv(self, fh):
        fh.write("i,j,label,score\n")
        for i, j, label, score in self.rows:
            fh.write(f"{i},{j},{label},{score!r}\n")


def predict_link_prob(trace):
    """Score every held-out dyad as the fraction of retained records whose
    imputed total is at least 1."""
    if not trace.records:
        raise ValueError("trace has no retained records")
    R = len(trace.records)
    hits = [0] * len(trace.heldout)
    for rec in trace.records:
        if len(rec.heldout_totals) != len(trace.heldout):
            raise ValueError("record heldout totals do not match the header")
        for k, tot in enumerate(rec.heldout_totals):
            if tot >= 1:
                hits[k] += 1
    rows = tuple((i, j, label, hits[k] / R)
                 for k, (i, j, label) in enumerate(trace.heldout))
    return PredictionTable(rows=rows)


def auc(labels, scores):
    """Exact AUC: P(score_pos > score_neg) + 0.5 P(tie), via midranks.

    Doubled midranks keep everything integer until the final division, so
    the result agrees exactly with the O(n^2) pairwise count.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if labels.shape != scores.shape:
        raise ValueError("labels and scores must align")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: need at least one of each class")

    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    l = labels[order]
    total2 = 0  # sum of doubled 1-based midranks over positives
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        dbl = i + j + 1  # ranks i+1..j share midrank (i+1+j)/2
        total2 += dbl * int(l[i:j].sum())
        i = j
    u2 = total2 - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


@dataclass(frozen=True)
class SimilarityVectors:
    """Per realized true edge: planted same-block indicator and estimate."""

    edges: tuple
    a: tuple
    w: tuple

    def __post_init__(self):
        if not (len(self.edges) == len(self.a) == len(self.w)):
            raise ValueError("edges, a, w must align")
        if any(x not in (0, 1) for x in self.a):
            raise ValueError("a entries must be 0 or 1")
        if any(not (0.0 <= x <= 1.0) for x in self.w):
            raise ValueError("w entries must lie in [0, 1]")


def same_block_vectors(truth, trace, window=None):
    """Build (a_k, w_k) over the realized true edges.

    a_k = H(sum_s A*s_ij [z*s_i = z*s_j]): did any true subnetwork place the
    edge within a block. w_k averages, over retained records, the fraction
    of the dyad's inferred count lying in same-block subnetworks; records
    where the dyad's total inferred count is zero are skipped, and an edge
    skipped in every record gets w_k = 0.

    `window`, when given, restricts to records from the last `window`
    iterations.
    """
    if not truth.dyads:
        raise ValueError("ground truth has no realized edges")
    records = trace.records
    if window is not None:
        cut = trace.iterations - int(window)
        records = tuple(r for r in records if r.t > cut)
    if not records:
        raise ValueError("no retained records in the requested window")
    if trace.tracked_dyads is None:
        raise ValueError("trace carries no tracked per-dyad counts")
    tracked = {d: k for k, d in enumerate(trace.tracked_dyads)}

    s_true = len(truth.zs)
    a = []
    idx = []
    for k, (i, j) in enumerate(truth.dyads):
        raw = sum(truth.counts[k][s]
                  for s in range(s_true) if truth.zs[s][i] == truth.zs[s][j])
        a.append(1 if raw >= 1 else 0)
        if (i, j) not in tracked:
            raise ValueError(f"true edge {(i, j)} is not tracked in the trace")
        idx.append(tracked[(i, j)])

    w = []
    for k, (i, j) in enumerate(truth.dyads):
        acc = 0.0
        kept = 0
        for rec in records:
            den = 0
            num = 0
            for s in range(trace.S):
                c = rec.tracked_counts[s][idx[k]]
                den += c
                if rec.z[s][i] == rec.z[s][j]:
                    num += c
            if den > 0:
                acc += num / den
                kept += 1
        w.append(acc / kept if kept else 0.0)

    return SimilarityVectors(edges=tuple(truth.dyads), a=tuple(a), w=tuple(w))


def structure_auc(v):
    """AUC of the estimated same-block weights against the true indicators."""
    return auc(v.a, v.w)

"""Independent reference computations backing the test suites.

Everything here is rebuilt from first principles on stdlib and scipy
primitives (math.lgamma, adaptive quadrature, explicit enumeration) so a
defect in the package cannot hide behind shared code. The package is never
imported from this module.
"""

import math

from scipy import integrate


def set_partitions(n):
    """All partitions of {0..n-1} as first-occurrence-canonical label tuples.

    Restricted growth strings: label of element i is at most one past the
    largest label used so far. These are exactly the canonical labelings.
    """
    parts = [[0]]
    for _ in range(n - 1):
        grown = []
        for p in parts:
            top = max(p)
            for lab in range(top + 2):
                grown.append(p + [lab])
        parts = grown
    return [tuple(p) for p in parts]


def partition_key(labels):
    """Relabel blocks by order of first occurrence."""
    mapping = {}
    out = []
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return tuple(out)


def crp_log_pmf(labels, alpha):
    sizes = {}
    for lab in labels:
        sizes[lab] = sizes.get(lab, 0) + 1
    n = len(labels)
    out = len(sizes) * math.log(alpha) + math.lgamma(alpha) - math.lgamma(n + alpha)
    for c in sizes.values():
        out += math.lgamma(c)
    return out


def pair_groups(labels):
    """Block pair (l <= m) -> dyads (i < j) whose endpoints lie in it."""
    n = len(labels)
    groups = {}
    for i in range(n):
        for j in range(i + 1, n):
            lo, hi = sorted((labels[i], labels[j]))
            groups.setdefault((lo, hi), []).append((i, j))
    return groups


def normalize_log(logs):
    top = max(logs.values())
    raw = {k: math.exp(v - top) for k, v in logs.items()}
    tot = sum(raw.values())
    return {k: v / tot for k, v in raw.items()}


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(keys):
    counts = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    total = len(keys)
    return {k: v / total for k, v in counts.items()}


def bernoulli_block_marginal(n_edges, n_dyads, kappa, lam):
    """Integral of (1-e^-x)^E e^{-x (M-E)} Gamma(x; kappa, lam) dx.

    Binomial expansion reduces it to a signed sum of Gamma Laplace
    transforms (lam / (lam + Z + j))^kappa with Z = M - E non-edges.
    """
    z = n_dyads - n_edges
    total = 0.0
    for j in range(n_edges + 1):
        total += math.comb(n_edges, j) * (-1.0) ** j * (lam / (lam + z + j)) ** kappa
    return total


def bernoulli_posterior(n, edges, alpha, kappa, lam):
    """Exact single-subnetwork posterior over partitions of a binary graph.

    The latent Poisson counts are integrated out per dyad: an observed edge
    contributes 1 - e^{-eta}, a non-edge e^{-eta}, and eta is integrated
    against its Gamma prior per block pair.
    """
    edge_set = {tuple(sorted(e)) for e in edges}
    post = {}
    for labels in set_partitions(n):
        logp = crp_log_pmf(labels, alpha)
        for dyads in pair_groups(labels).values():
            e = sum(1 for d in dyads if d in edge_set)
            logp += math.log(bernoulli_block_marginal(e, len(dyads), kappa, lam))
        post[labels] = logp
    return normalize_log(post)


def collapsed_posterior_fixed_counts(n, counts, alpha, kappa, lam):
    """Exact posterior over partitions at fixed per-dyad latent counts.

    `counts` maps every dyad (i, j) with i < j to its count; every dyad
    carries unit exposure. Count factorials are partition-independent and
    cancel in the normalization.
    """
    post = {}
    for labels in set_partitions(n):
        logp = crp_log_pmf(labels, alpha)
        for dyads in pair_groups(labels).values():
            nn = sum(counts[d] for d in dyads)
            mm = len(dyads)
            logp += (kappa * math.log(lam) - math.lgamma(kappa)
                     + math.lgamma(nn + kappa) - (nn + kappa) * math.log(mm + lam))
        post[labels] = logp
    return normalize_log(post)


def quad_pair_loglik(counts, kappa, lam):
    """log of integral prod_c Pois(c; x) Gamma(x; kappa, lam) dx, by quadrature."""
    def integrand(x):
        val = lam ** kappa * x ** (kappa - 1.0) * math.exp(-lam * x) / math.gamma(kappa)
        for c in counts:
            val *= x ** c * math.exp(-x) / math.factorial(c)
        return val

    val, _ = integrate.quad(integrand, 0.0, math.inf, limit=400)
    return math.log(val)


def quad_collapsed_loglik(labels, counts, kappa, lam):
    """Quadrature oracle for the full collapsed likelihood of one instance."""
    total = 0.0
    for dyads in pair_groups(labels).values():
        total += quad_pair_loglik([counts[d] for d in dyads], kappa, lam)
    return total


def auc_bruteforce(labels, scores):
    """All-pairs AUC: wins plus half ties over positives times negatives."""
    pos = [s for l, s in zip(labels, scores) if l == 1]
    neg = [s for l, s in zip(labels, scores) if l == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def mnsbm_joint_posterior_path3(alpha, kappa, lam, cap):
    """Exact S=2 joint on the 3-vertex path, counts capped at `cap`.

    Observed edges (0,1) and (1,2); dyad (0,2) is a zero-count observation.
    States are (partition 1, partition 2, ((c^1, c^2) per edge)); an edge's
    total must be at least 1 (Heaviside constraint) and at most `cap`.
    Probabilities are renormalized within the cap.
    """
    edge_splits = [(c1, c2)
                   for tot in range(1, cap + 1)
                   for c1 in range(tot + 1)
                   for c2 in (tot - c1,)]
    parts = set_partitions(3)
    dyad_order = [(0, 1), (0, 2), (1, 2)]
    post = {}
    for z1 in parts:
        for z2 in parts:
            for s01 in edge_splits:
                for s12 in edge_splits:
                    by_dyad = {(0, 1): s01, (1, 2): s12, (0, 2): (0, 0)}
                    logp = crp_log_pmf(z1, alpha) + crp_log_pmf(z2, alpha)
                    for s, labels in enumerate((z1, z2)):
                        for dyads in pair_groups(labels).values():
                            nn = sum(by_dyad[d][s] for d in dyads)
                            mm = len(dyads)
                            logp += (kappa * math.log(lam) - math.lgamma(kappa)
                                     + math.lgamma(nn + kappa)
                                     - (nn + kappa) * math.log(mm + lam))
                    for d in dyad_order:
                        logp -= math.lgamma(by_dyad[d][0] + 1)
                        logp -= math.lgamma(by_dyad[d][1] + 1)
                    post[(z1, z2, s01, s12)] = logp
    return normalize_log(post)

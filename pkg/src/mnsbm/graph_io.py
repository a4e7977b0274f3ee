"""Edge-list parsing, preprocessing, persistence and held-out splits.

Observed graphs are undirected, binary and self-loop free. Input may be
directed, weighted, duplicated or 1-based; parsing symmetrizes, merges
duplicates by summing weights, binarizes (any positive total weight is a
link) and drops self-loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class GraphParseError(ValueError):
    """Malformed edge-list input."""


class SplitError(ValueError):
    """A requested held-out split is infeasible."""


@dataclass(frozen=True)
class ObservedGraph:
    """Binary symmetric observation over n vertices.

    `dyads` holds the canonical sorted (i, j) pairs with i < j that carry an
    edge; absent pairs are zeros. Held-out dyads are simply not listed here;
    they live in a HeldoutSet.
    """

    n: int
    dyads: tuple

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        prev = None
        for d in self.dyads:
            i, j = d
            if not (0 <= i < j < self.n):
                raise ValueError(f"dyad {d} out of range for n={self.n}")
            if prev is not None and d <= prev:
                raise ValueError("dyads must be sorted and unique")
            prev = d

    @property
    def edge_count(self):
        return len(self.dyads)

    @property
    def pair_count(self):
        return self.n * (self.n - 1) // 2

    def edge_set(self):
        return frozenset(self.dyads)


@dataclass(frozen=True)
class HeldoutSet:
    """Dyads removed from the training likelihood, with their true labels."""

    dyads: tuple  # (i, j, label) with i < j, label in {0, 1}
    fraction: float

    def __post_init__(self):
        seen = set()
        for i, j, lab in self.dyads:
            if not (0 <= i < j):
                raise ValueError(f"held-out dyad ({i},{j}) not canonical")
            if lab not in (0, 1):
                raise ValueError("held-out labels must be 0 or 1")
            if (i, j) in seen:
                raise ValueError(f"duplicate held-out dyad ({i},{j})")
            seen.add((i, j))

    @property
    def n_pos(self):
        return sum(1 for _, _, lab in self.dyads if lab == 1)

    @property
    def n_neg(self):
        return len(self.dyads) - self.n_pos

    def pair_set(self):
        return frozenset((i, j) for i, j, _ in self.dyads)


EMPTY_HELDOUT = HeldoutSet((), 0.0)


def parse_edge_list(source, n_hint=None, one_based=False):
    """Parse an edge-list character stream into a canonical ObservedGraph.

    Lines are "i j" or "i j w"; lines whose first non-blank character is
    '#' or '%' are comments. Duplicate and mirrored entries are merged by
    summing weights before binarization. Self-loops are dropped.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if n_hint is not None and n_hint < 0:
        raise ValueError("n_hint must be nonnegative")

    weights = {}
    max_idx = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise GraphParseError(f"line {lineno}: expected 'i j' or 'i j w', got {len(tokens)} fields")
        try:
            i = int(tokens[0])
            j = int(tokens[1])
        except ValueError:
            raise GraphParseError(f"line {lineno}: non-integer vertex index") from None
        if len(tokens) == 3:
            try:
                w = float(tokens[2])
            except ValueError:
                raise GraphParseError(f"line {lineno}: non-numeric weight") from None
            if not math.isfinite(w) or w < 0:
                raise GraphParseError(f"line {lineno}: weight must be finite and nonnegative")
        else:
            w = 1.0
        if one_based:
            i -= 1
            j -= 1
        if i < 0 or j < 0:
            raise GraphParseError(f"line {lineno}: vertex index out of range")
        if n_hint is not None and (i >= n_hint or j >= n_hint):
            raise GraphParseError(f"line {lineno}: vertex index >= n_hint ({n_hint})")
        if i == j:
            continue
        key = (i, j) if i < j else (j, i)
        weights[key] = weights.get(key, 0.0) + w
        if j > max_idx:
            max_idx = j
        if i > max_idx:
            max_idx = i

    n = n_hint if n_hint is not None else max_idx + 1
    dyads = tuple(sorted(k for k, w in weights.items() if w > 0))
    return ObservedGraph(n=n, dyads=dyads)


def write_graph(g, sink):
    """Emit the canonical sorted edge list, one "i j" per line, 0-based."""
    for i, j in g.dyads:
        sink.write(f"{i} {j}\n")


def split_holdout(g, edge_fraction, rng):
    """Hold out floor(edge_fraction * E) edges and as many non-edges.

    Held-out dyads are removed from the training dyad set entirely; the
    returned train graph lists the remaining edges and the HeldoutSet lists
    the test dyads with their true labels. Negatives are sampled uniformly
    from the non-edge dyads.
    """
    if not (0.0 < edge_fraction < 1.0):
        raise ValueError("edge_fraction must lie in (0, 1)")
    e = g.edge_count
    # guard against FP droop on exact products like 0.3 * 10
    n_test = int(math.floor(edge_fraction * e + 1e-9))
    if n_test < 1:
        raise SplitError(f"fraction {edge_fraction} of {e} edges holds out nothing")
    n_nonedge = g.pair_count - e
    if n_nonedge < n_test:
        raise SplitError(f"need {n_test} non-edges, graph has only {n_nonedge}")

    pos_idx = rng.choice(e, size=n_test, replace=False)
    pos = sorted(g.dyads[int(k)] for k in pos_idx)
    pos_set = set(pos)

    edge_set = g.edge_set()
    neg = set()
    if n_nonedge <= 4 * n_test or g.pair_count <= 200_000:
        # dense or small: enumerate the complement and sample directly
        complement = [
            (i, j)
            for i in range(g.n)
            for j in range(i + 1, g.n)
            if (i, j) not in edge_set
        ]
        neg_idx = rng.choice(len(complement), size=n_test, replace=False)
        neg = {complement[int(k)] for k in neg_idx}
    else:
        while len(neg) < n_test:
            i = int(rng.integers(0, g.n))
            j = int(rng.integers(0, g.n))
            if i == j:
                continue
            d = (i, j) if i < j else (j, i)
            if d in edge_set or d in neg:
                continue
            neg.add(d)

    train = ObservedGraph(g.n, tuple(d for d in g.dyads if d not in pos_set))
    test = HeldoutSet(
        tuple([(i, j, 1) for i, j in pos] + [(i, j, 0) for i, j in sorted(neg)]),
        edge_fraction,
    )
    return train, test

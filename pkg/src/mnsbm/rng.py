"""Named, reproducible random streams.

Every stochastic task in a sweep owns a private PCG64 stream derived from the
master seed and a structural key (what the draw is for, not when it happens).
Streams persist for the lifetime of a chain, so results are independent of
worker count and scheduling.
"""

import numpy as np

# Stream kinds, used as the first component of a stream key.
SUBNET = 0          # per-subnetwork model moves: eta, assignment sweep, MH
EDGE_TOTAL = 1      # per dyad block: total-count draws for training edges
EDGE_SPLIT = 2      # per (dyad block, subnetwork): count-splitting races
HELDOUT_TOTAL = 3   # per dyad block: held-out total imputation
HELDOUT_SPLIT = 4   # per (dyad block, subnetwork): held-out splitting races
EXPERIMENT = 5      # per-run derived seeds of an experiment grid
HOLDOUT = 6         # train/test splitting
GENERATE = 7        # synthetic data generation

# Dyads per block stream. Contiguous dyad ranges of this size share one
# total stream and one split stream per subnetwork.
DYAD_BLOCK = 4096


def stream(master_seed, *key):
    """Return the Generator owned by (master_seed, key).

    The same arguments always yield the same stream, across processes and
    platforms; distinct keys yield statistically independent streams.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed, *key):
    """A 64-bit integer seed derived from (master_seed, key)."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def n_blocks(count, block=DYAD_BLOCK):
    """Number of dyad blocks covering `count` dyads."""
    return (int(count) + block - 1) // block

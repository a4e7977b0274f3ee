"""Chain trace records and their line-delimited persistence format.

A trace file is human-inspectable and diff-friendly:

    line 1:  "mnsbm-trace 1"          (format version)
    line 2:  header JSON
    line 3+: one record JSON per retained iteration

The header deliberately carries no worker count, backend name, or timing,
so traces from the same seed are byte-identical regardless of how the
chain was scheduled. Those runtime facts belong in the run manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

FORMAT_NAME = "mnsbm-trace"
FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    """Unreadable or version-incompatible trace input."""


@dataclass(frozen=True)
class TraceRecord:
    """State snapshot at the end of one retained sweep."""

    t: int
    logp: float
    z: tuple            # per subnetwork: tuple of n labels
    L: tuple            # per subnetwork
    alpha: tuple
    kappa: tuple
    lambda_rate: tuple
    heldout_totals: tuple      # aligned with the header's held-out dyads
    tracked_counts: tuple | None = None  # per subnetwork x tracked dyad


@dataclass(frozen=True)
class ChainTrace:
    """Retained records plus everything needed to interpret them."""

    n: int
    S: int
    iterations: int
    burn_in: int
    thinning: int
    master_seed: int
    scan: str
    update_hyperparams: bool
    heldout: tuple             # (i, j, label) triples
    tracked_dyads: tuple | None
    records: tuple
    manifest: str | None = None

    @property
    def retained(self):
        return len(self.records)

    def expected_retained(self):
        return -(-(self.iterations - self.burn_in) // self.thinning)


def _dump(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_trace(trace, sink):
    """Serialize; records stream one per line so interruption truncates cleanly."""
    sink.write(f"{FORMAT_NAME} {FORMAT_VERSION}\n")
    header = {
        "n": trace.n,
        "S": trace.S,
        "iterations": trace.iterations,
        "burn_in": trace.burn_in,
        "thinning": trace.thinning,
        "master_seed": trace.master_seed,
        "scan": trace.scan,
        "update_hyperparams": trace.update_hyperparams,
        "heldout": [list(d) for d in trace.heldout],
        "tracked_dyads": None if trace.tracked_dyads is None
        else [list(d) for d in trace.tracked_dyads],
        "manifest": trace.manifest,
    }
    sink.write(_dump(header) + "\n")
    for rec in trace.records:
        row = {
            "t": rec.t,
            "logp": rec.logp,
            "z": [list(zz) for zz in rec.z],
            "L": list(rec.L),
            "alpha": list(rec.alpha),
            "kappa": list(rec.kappa),
            "lambda": list(rec.lambda_rate),
            "heldout_totals": list(rec.heldout_totals),
        }
        if rec.tracked_counts is not None:
            row["tracked_counts"] = [list(c) for c in rec.tracked_counts]
        sink.write(_dump(row) + "\n")


def read_trace(source):
    """Parse a trace written by write_trace. Raises TraceFormatError."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = source.splitlines()
    if not lines:
        raise TraceFormatError("empty trace input")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_NAME:
        raise TraceFormatError(f"not a {FORMAT_NAME} file")
    if int(head[1]) != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported trace version {head[1]}")
    if len(lines) < 2:
        raise TraceFormatError("missing trace header")
    try:
        header = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"bad trace header: {exc}") from None

    records = []
    for k, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"bad record on line {k}: {exc}") from None
        records.append(TraceRecord(
            t=row["t"],
            logp=row["logp"],
            z=tuple(tuple(zz) for zz in row["z"]),
            L=tuple(row["L"]),
            alpha=tuple(row["alpha"]),
            kappa=tuple(row["kappa"]),
            lambda_rate=tuple(row["lambda"]),
            heldout_totals=tuple(row["heldout_totals"]),
            tracked_counts=None if "tracked_counts" not in row
            else tuple(tuple(c) for c in row["tracked_counts"]),
        ))
    return ChainTrace(
        n=header["n"],
        S=header["S"],
        iterations=header["iterations"],
        burn_in=header["burn_in"],
        thinning=header["thinning"],
        master_seed=header["master_seed"],
        scan=header["scan"],
        update_hyperparams=header["update_hyperparams"],
        heldout=tuple(tuple(d) for d in header["heldout"]),
        tracked_dyads=None if header["tracked_dyads"] is None
        else tuple(tuple(d) for d in header["tracked_dyads"]),
        records=tuple(records),
        manifest=header.get("manifest"),
    )

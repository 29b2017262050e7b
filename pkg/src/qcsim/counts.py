"""Photon-count distributions and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidStateError

TRUNCATION_TOL = 1e-10
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class CountDistribution:
    """Probabilities p_n for n = 0..n_max, optionally backed by tallies N_n.

    For exact distributions the probabilities may sum to slightly less than
    one; the missing mass is the truncated tail and is reported, never
    redistributed.
    """

    probs: np.ndarray
    counts: np.ndarray | None = None
    provenance: str = "exact"
    tail_tol: float = TRUNCATION_TOL

    def __post_init__(self):
        if self.provenance not in ("exact", "sampled"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        counts = None
        if self.counts is not None:
            counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
            if np.any(counts < 0):
                raise InvalidStateError("tallies must be non-negative")
            total = int(counts.sum())
            if total <= 0:
                raise InvalidStateError("tallies must contain at least one trial")
            probs = counts / total
            counts.setflags(write=False)
        else:
            probs = np.asarray(self.probs, dtype=float).reshape(-1)
            if np.any(probs < -NEGATIVE_TOL):
                raise InvalidStateError(f"negative probability {probs.min():.3e}")
            probs = np.clip(probs, 0.0, None)
        total_p = float(probs.sum())
        if total_p > 1.0 + 1e-9 or total_p < 1.0 - self.tail_tol:
            raise InvalidStateError(
                f"probabilities sum to {total_p!r}, outside [1 - {self.tail_tol:.1e}, 1]"
            )
        probs = np.array(probs)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts) -> "CountDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts / counts.sum(), counts=counts, provenance="sampled")

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @property
    def n_trials(self) -> int | None:
        return None if self.counts is None else int(self.counts.sum())

    @property
    def tail_mass(self) -> float:
        return max(0.0, 1.0 - float(self.probs.sum()))

    @property
    def parity(self) -> float:
        return float(((-1.0) ** np.arange(len(self.probs))) @ self.probs)

    @property
    def mean(self) -> float:
        return float(np.arange(len(self.probs)) @ self.probs)

    def padded(self, n_max: int) -> np.ndarray:
        out = np.zeros(max(n_max, self.n_max) + 1)
        out[: len(self.probs)] = self.probs
        return out

    def to_csv(self, path: str | Path | None = None) -> str:
        """Write rows ``n,p,count`` (count left empty for exact distributions)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "p", "count"])
        for n, p in enumerate(self.probs):
            count = "" if self.counts is None else int(self.counts[n])
            writer.writerow([n, repr(float(p)), count])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "CountDistribution":
        """Read the ``n,p,count`` format; ``source`` is a path or the CSV text itself."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"n", "p", "count"}:
            raise ValueError("expected a CSV with header n,p,count")
        ns = [int(r["n"]) for r in rows]
        if ns != list(range(len(rows))):
            raise ValueError("photon numbers must run 0, 1, 2, ... without gaps")
        if all(r["count"] != "" for r in rows):
            return cls.from_counts([int(r["count"]) for r in rows])
        return cls(np.array([float(r["p"]) for r in rows]), provenance="exact")

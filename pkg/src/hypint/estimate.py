"""Estimate records and deterministic chunked Monte Carlo."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# samples per independently seeded chunk; fixed so results never depend on batching
CHUNK = 1 << 15


@dataclass(frozen=True)
class Estimate:
    """A computed quantity with its uncertainty.

    For quadrature ``std_err`` is a deterministic error bound; for Monte Carlo
    it is the standard error of the mean.
    """

    value: float
    std_err: float
    n_samples: int
    method: str = "quadrature"
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.std_err) or self.std_err < 0:
            raise ValueError(f"std_err must be finite and >= 0, got {self.std_err}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.method not in ("quadrature", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")

    def __add__(self, other: "Estimate") -> "Estimate":
        if self.method == other.method == "quadrature":
            err, method = self.std_err + other.std_err, "quadrature"
        else:
            err, method = math.hypot(self.std_err, other.std_err), "monte-carlo"
        return Estimate(self.value + other.value, err, max(self.n_samples, other.n_samples), method)

    def scaled(self, a: float) -> "Estimate":
        return Estimate(a * self.value, abs(a) * self.std_err, self.n_samples, self.method, dict(self.info))

    def to_dict(self) -> dict:
        return {"value": self.value, "std_err": self.std_err, "n_samples": self.n_samples, "method": self.method}


def chunk_rngs(seed: int, n: int, chunk: int = CHUNK):
    """Yield ``(chunk_index, size, Generator)`` covering ``n`` samples.

    Chunk ``i`` is seeded by ``SeedSequence([seed, i])`` so any chunk can be
    regenerated independently of the others.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    n_chunks = -(-n // chunk)
    for i in range(n_chunks):
        size = min(chunk, n - i * chunk)
        yield i, size, np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), i])))


def mc_mean(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of i.i.d. weighted samples."""
    v = np.asarray(values, dtype=float)
    n = v.size
    mean = float(np.mean(v))
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(v, ddof=1) / math.sqrt(n))

"""Dense float64 matrix helpers and a seeded, portable random stream.

All arrays handled by this package are two-dimensional row-major float64
ndarrays ("matrices"); rows are samples, columns are features. The helpers
here enforce that convention and keep every public result finite.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Rng",
    "as_matrix",
    "check_finite",
    "matmul",
    "standard_normal",
    "uniform",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce `a` to a 2-D float64 array, rejecting other ranks."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {out.shape}")
    return out


def check_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Raise if `a` contains NaN or Inf entries."""
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


class Rng:
    """Seeded random stream backed by PCG64.

    The generator is constructed explicitly (never the interpreter default)
    so that a given seed yields the same draw sequence on every platform.
    State round-trips through plain dicts for checkpointing.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, rows: int, cols: int) -> np.ndarray:
        return self._gen.standard_normal((rows, cols))

    def uniform(self, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
        if not lo < hi:
            raise ValueError(f"uniform requires lo < hi, got lo={lo}, hi={hi}")
        return self._gen.uniform(lo, hi, size=(rows, cols))

    def integers(self, lo: int, hi: int, n: int) -> np.ndarray:
        """n independent integer draws in [lo, hi)."""
        return self._gen.integers(lo, hi, size=n)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, offset: int) -> "Rng":
        """Independent stream derived from this stream's seed."""
        return Rng(self.seed + int(offset))

    def get_state(self) -> dict:
        state = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "pcg64_state": int(state["state"]["state"]),
            "pcg64_inc": int(state["state"]["inc"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }

    def set_state(self, state: dict) -> None:
        self.seed = int(state["seed"])
        self._gen.bit_generator.state = {
            "bit_generator": "PCG64",
            "state": {
                "state": int(state["pcg64_state"]),
                "inc": int(state["pcg64_inc"]),
            },
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Rng":
        rng = cls(state["seed"])
        rng.set_state(state)
        return rng


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit conformance check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} by "
            f"{b.shape[0]}x{b.shape[1]}"
        )
    return check_finite(a @ b, "matmul result")


def standard_normal(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """rows x cols matrix of i.i.d. N(0,1) draws from `rng`."""
    if rows < 1 or cols < 1:
        raise ValueError("standard_normal requires rows, cols >= 1")
    return rng.standard_normal(rows, cols)


def uniform(rng: Rng, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
    """rows x cols matrix of i.i.d. Uniform(lo, hi) draws from `rng`."""
    if rows < 1 or cols < 1:
        raise ValueError("uniform requires rows, cols >= 1")
    return rng.uniform(rows, cols, lo, hi)

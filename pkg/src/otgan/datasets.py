"""Synthetic 2D ring-of-Gaussians data and mode-coverage diagnostics.

The mixture places `n_modes` isotropic Gaussians with equal weight on a
circle. Coverage counts how many mixture components receive a nontrivial
share of nearby samples, the standard collapse readout for this family of
toy problems.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng, as_matrix

__all__ = [
    "CoverageReport",
    "RingMixture",
    "load_samples_csv",
    "mode_coverage",
    "sample_mixture",
    "save_samples_csv",
]


@dataclass(frozen=True)
class RingMixture:
    """Equal-weight Gaussians with means equally spaced on a circle."""

    n_modes: int = 8
    radius: float = 2.0
    sigma: float = 0.02

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.radius <= 0 or self.sigma < 0:
            raise ValueError("radius must be > 0 and sigma >= 0")

    @property
    def means(self) -> np.ndarray:
        angles = 2.0 * np.pi * np.arange(self.n_modes) / self.n_modes
        return np.column_stack([self.radius * np.cos(angles), self.radius * np.sin(angles)])


def sample_mixture(mix: RingMixture, rng: Rng, n: int):
    """n samples and their mode labels; modes chosen uniformly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = rng.integers(0, mix.n_modes, n)
    noise = rng.standard_normal(n, 2)
    samples = mix.means[labels] + mix.sigma * noise
    return samples, labels


@dataclass
class CoverageReport:
    covered_modes: int
    per_mode_counts: list = field(default_factory=list)
    high_quality_fraction: float = 0.0


def mode_coverage(samples: np.ndarray, mix: RingMixture,
                  threshold_multiplier: float = 3.0) -> CoverageReport:
    """Assign samples to nearest means and count the well-hit modes.

    A sample is high quality if it lies within threshold_multiplier * sigma
    of its nearest mean; a mode counts as covered once its high-quality
    count reaches max(1, 1% of samples).
    """
    samples = as_matrix(samples, "samples")
    if samples.shape[1] != 2:
        raise ValueError("coverage expects 2-dimensional samples")
    means = mix.means
    d2 = (
        np.sum(samples * samples, axis=1)[:, None]
        + np.sum(means * means, axis=1)[None, :]
        - 2.0 * samples @ means.T
    )
    nearest = np.argmin(d2, axis=1)
    dist = np.sqrt(np.maximum(d2[np.arange(samples.shape[0]), nearest], 0.0))
    good = dist <= threshold_multiplier * mix.sigma
    counts = np.bincount(nearest[good], minlength=mix.n_modes)
    need = max(1, int(0.01 * samples.shape[0]))
    covered = int(np.sum(counts >= need))
    return CoverageReport(
        covered_modes=covered,
        per_mode_counts=[int(c) for c in counts],
        high_quality_fraction=float(np.mean(good)),
    )


def save_samples_csv(path, samples: np.ndarray, labels=None) -> None:
    """Write samples as x,y[,label] rows; labels column only when given."""
    samples = as_matrix(samples, "samples")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if labels is None:
            writer.writerow(["x", "y"])
            for row in samples:
                writer.writerow([repr(float(row[0])), repr(float(row[1]))])
        else:
            writer.writerow(["x", "y", "label"])
            for row, lab in zip(samples, labels):
                writer.writerow([repr(float(row[0])), repr(float(row[1])), int(lab)])


def load_samples_csv(path):
    """Read a sample dump back; returns (samples, labels or None)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_labels = len(header) == 3
        rows = []
        labels = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: ragged row at line {line_no}")
            rows.append([float(row[0]), float(row[1])])
            if has_labels:
                labels.append(int(row[2]))
    samples = np.array(rows, dtype=np.float64).reshape(len(rows), 2)
    return samples, (np.array(labels) if has_labels else None)

"""Random hypersphere projections and bounded polynomial features.

A slice is a unit vector used to project a random vector to a scalar.
Projected samples are squashed through tanh, which keeps every moment
finite without losing information, and raised to powers 1..K.  A linear
combination of the resulting feature block realises an arbitrary K-order
polynomial transform of each projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_matrix

#: Variance floor applied when z-scoring near-constant columns.
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class PolyConfig:
    """Order of the tanh-polynomial feature expansion.

    The squash is fixed to tanh.  ``order`` is the highest power kept and
    stays fixed for the lifetime of any estimator fitted with it.
    """

    order: int = 3

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or self.order < 1:
            raise ValueError(f"poly order must be an integer >= 1, got {self.order}")


@dataclass(frozen=True)
class SliceSet:
    """Projection directions for the two variables.

    ``theta`` has shape (S, D) and ``phi`` shape (S, d); every row lies on
    the respective unit hypersphere.
    """

    theta: np.ndarray
    phi: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        for name, M in (("theta", self.theta), ("phi", self.phi)):
            if not isinstance(M, np.ndarray) or M.ndim != 2:
                raise ValueError(f"{name} must be a 2-D array")
            if M.shape[0] < 1 or M.shape[1] < 1:
                raise ValueError(f"{name} must be non-empty, got shape {M.shape}")
            norms = np.linalg.norm(M, axis=1)
            if not np.allclose(norms, 1.0, rtol=0.0, atol=1e-12):
                raise ValueError(f"rows of {name} must have unit Euclidean norm")
        if self.theta.shape[0] != self.phi.shape[0]:
            raise ValueError("theta and phi must hold the same number of slices")

    @property
    def n_slices(self) -> int:
        return self.theta.shape[0]


def _unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """I.i.d. uniform draws on the unit hypersphere (normalised Gaussians)."""
    rows = rng.standard_normal((count, dim))
    norms = np.linalg.norm(rows, axis=1)
    # a zero draw has probability 0 but would poison the normalisation
    while (bad := norms < 1e-12).any():
        rows[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(rows, axis=1)
    return rows / norms[:, None]


def sample_slices(n_slices, dim_z, dim_t, seed=None, rng=None) -> SliceSet:
    """Sample ``n_slices`` directions per side, uniform on the hyperspheres.

    Deterministic given ``seed``; pass ``rng`` instead to draw from an
    existing substream (``seed`` is then only recorded, not used).
    """
    for name, v in (("n_slices", n_slices), ("dim_z", dim_z), ("dim_t", dim_t)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if rng is None:
        rng = np.random.default_rng(seed)
    theta = _unit_rows(rng, int(n_slices), int(dim_z))
    phi = _unit_rows(rng, int(n_slices), int(dim_t))
    return SliceSet(theta=theta, phi=phi, seed=seed)


def feature_map(X, directions, cfg: PolyConfig = PolyConfig()) -> np.ndarray:
    """Expand samples into tanh-power features of every projection.

    Output has shape (n, S*K); the block of K consecutive columns starting
    at i*K holds tanh(directions[i] @ x) ** k for k = 1..K.  All entries
    lie in [-1, 1].  The constant feature is omitted: correlation-based
    fitting centers the features, which would zero it out and make the
    covariance singular.
    """
    X = as_matrix(X, "X")
    directions = np.asarray(directions, dtype=np.float64)
    if directions.ndim != 2:
        raise ValueError("directions must be a 2-D array of unit rows")
    if X.shape[1] != directions.shape[1]:
        raise ValueError(
            f"X has {X.shape[1]} columns but slices expect {directions.shape[1]}"
        )
    squashed = np.tanh(X @ directions.T)  # (n, S)
    n, S = squashed.shape
    K = cfg.order
    out = np.empty((n, S * K), dtype=np.float64)
    power = squashed
    for k in range(K):
        out[:, k::K] = power
        if k + 1 < K:
            power = power * squashed
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring parameters learned on a fitting set.

    Slice directions are scale-sensitive, so inputs are standardised
    before projection.  Near-constant columns get a variance floor to
    avoid division by zero; they standardise to ~0.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = as_matrix(X, "X")
        mean = X.mean(axis=0)
        var = X.var(axis=0)
        scale = np.sqrt(np.maximum(var, VARIANCE_FLOOR))
        return cls(mean=mean, scale=scale)

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X, "X")
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError(
                f"X has {X.shape[1]} columns, standardizer was fitted on "
                f"{self.mean.shape[0]}"
            )
        return (X - self.mean) / self.scale

    @property
    def floored_columns(self) -> np.ndarray:
        """Indices of columns that hit the variance floor during fit."""
        return np.flatnonzero(self.scale <= np.sqrt(VARIANCE_FLOOR))

"""Input validation helpers shared by the estimators and core operations."""

import numpy as np

from .exceptions import InsufficientDataError, InvalidDataError


def as_matrix(X, name="X", require_finite=True) -> np.ndarray:
    """Coerce to a 2-D float64 sample matrix (rows are samples).

    1-D input is treated as a single column.
    """
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got ndim={A.ndim}")
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {A.shape}")
    if require_finite and not np.isfinite(A).all():
        raise InvalidDataError(f"{name} contains non-finite entries")
    return A


def check_paired(Z, T, zname="Z", tname="T") -> None:
    if Z.shape[0] != T.shape[0]:
        raise ValueError(
            f"{zname} and {tname} must have the same number of rows: "
            f"{Z.shape[0]} != {T.shape[0]}"
        )


def check_min_samples(n, minimum, what="this operation") -> None:
    if n < minimum:
        raise InsufficientDataError(
            f"{what} needs at least {minimum} samples, got {n}"
        )

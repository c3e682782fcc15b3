"""Joint CCA over sliced tanh-polynomial features.

The dependence statistic is the top canonical correlation between the
stacked feature blocks of all Z-side slices and all T-side slices.  One
whitened eigensolve fits the weights analytically; the fitted weights can
then be re-evaluated on fresh batches and differentiated with respect to
the Z batch in closed form, which is what the representation-learning
min-step consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import InsufficientDataError, InvalidDataError
from .slicing import PolyConfig, SliceSet, Standardizer, feature_map
from .validation import as_matrix, check_min_samples, check_paired

#: Default ridge, relative to the mean diagonal of each covariance block.
#: With S slices and order K the feature dimension K*S routinely exceeds
#: the fitting-set size, so the raw covariances can be singular.
RIDGE_SCALE_DEFAULT = 1e-4

#: Whitening eigenvalues below this fraction of the largest are clamped;
#: directions that flat carry no usable signal.
EIGENVALUE_FLOOR = 1e-10

_TINY = np.finfo(np.float64).tiny


def pearson(a, b) -> float:
    """Sample Pearson correlation of two vectors; 0 if either is constant."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    if saa <= _TINY or sbb <= _TINY:
        return 0.0
    return float(ac @ bc) / np.sqrt(saa * sbb)


def pearson_with_gradient(a, b):
    """Batch Pearson correlation and its exact gradients w.r.t. both inputs.

    Returns ``(rho, d_rho_da, d_rho_db, degenerate)``.  When either input
    has (numerically) zero variance the correlation is defined as 0, both
    gradients are zero and the degenerate flag is set.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    sab = float(ac @ bc)
    if saa <= _TINY or sbb <= _TINY or not np.isfinite(saa + sbb + sab):
        return 0.0, np.zeros_like(a), np.zeros_like(b), True
    denom = np.sqrt(saa * sbb)
    rho = sab / denom
    da = (bc - (sab / saa) * ac) / denom
    db = (ac - (sab / sbb) * bc) / denom
    return float(rho), da, db, False


@dataclass(frozen=True)
class CcaSolution:
    """Top canonical pair plus everything needed to reuse it.

    ``rho`` is the sample Pearson correlation of the two weighted feature
    projections on the fitting set, clamped to [0, 1]; the sign convention
    flips ``v`` so the fitting-set correlation is non-negative.
    """

    w: np.ndarray
    v: np.ndarray
    rho: float
    mean_z: np.ndarray
    mean_t: np.ndarray
    ridge_z: float
    ridge_t: float


@dataclass(frozen=True)
class SiEstimate:
    """A fitted sliced-information statistic.

    Bundles the CCA solution with the slices, polynomial order and the
    z-scoring parameters of the fitting set, so the statistic can be
    re-evaluated on any row-aligned batch.
    """

    statistic: float
    solution: CcaSolution
    slices: SliceSet
    poly: PolyConfig
    z_scaler: Standardizer
    t_scaler: Standardizer


def _inverse_sqrt(C: np.ndarray) -> np.ndarray:
    """Inverse matrix square root of a symmetric PSD matrix, with floor."""
    evals, evecs = scipy.linalg.eigh(C)
    lam_max = float(evals[-1])
    floor = max(EIGENVALUE_FLOOR * max(lam_max, 0.0), 1e-30)
    evals = np.maximum(evals, floor)
    return (evecs / np.sqrt(evals)) @ evecs.T


def solve_cca(Zf, Tf, ridge: float | None = None) -> CcaSolution:
    """Weights maximising the sample correlation of two feature projections.

    Centers both sides, forms covariances with a ridge on the diagonal
    blocks, whitens, and takes the top singular pair of the whitened
    cross-covariance.  ``ridge`` is the absolute value added to each
    diagonal; ``None`` selects ``RIDGE_SCALE_DEFAULT`` times the mean
    diagonal of the respective block, which keeps conditioning scale-free.
    """
    Zf = as_matrix(Zf, "Zf")
    Tf = as_matrix(Tf, "Tf")
    check_paired(Zf, Tf, "Zf", "Tf")
    n = Zf.shape[0]
    check_min_samples(n, 2, "solve_cca")
    if ridge is not None and ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")

    mean_z = Zf.mean(axis=0)
    mean_t = Tf.mean(axis=0)
    Zc = Zf - mean_z
    Tc = Tf - mean_t
    denom = n - 1
    Czz = (Zc.T @ Zc) / denom
    Ctt = (Tc.T @ Tc) / denom
    Czt = (Zc.T @ Tc) / denom
    if not (np.isfinite(Czz).all() and np.isfinite(Ctt).all() and np.isfinite(Czt).all()):
        raise InvalidDataError("covariance matrices are not finite")

    if ridge is None:
        ridge_z = RIDGE_SCALE_DEFAULT * float(np.trace(Czz)) / Czz.shape[0]
        ridge_t = RIDGE_SCALE_DEFAULT * float(np.trace(Ctt)) / Ctt.shape[0]
    else:
        ridge_z = ridge_t = float(ridge)

    iz = _inverse_sqrt(Czz + ridge_z * np.eye(Czz.shape[0]))
    it = _inverse_sqrt(Ctt + ridge_t * np.eye(Ctt.shape[0]))
    M = iz @ Czt @ it
    U, _, Vt = np.linalg.svd(M, full_matrices=False)
    w = iz @ U[:, 0]
    v = it @ Vt[0]

    r = pearson(Zc @ w, Tc @ v)
    if r < 0:
        v = -v
        r = -r
    return CcaSolution(
        w=w,
        v=v,
        rho=float(np.clip(r, 0.0, 1.0)),
        mean_z=mean_z,
        mean_t=mean_t,
        ridge_z=ridge_z,
        ridge_t=ridge_t,
    )


def estimate_si(Z, T, slices: SliceSet, poly: PolyConfig = PolyConfig(),
                ridge: float | None = None) -> SiEstimate:
    """Fit the sliced-information statistic on row-aligned samples.

    Z-scores both variables on the fitting set, expands the slice features
    and solves the joint CCA; the statistic is the fitted correlation.
    """
    Z = as_matrix(Z, "Z")
    T = as_matrix(T, "T")
    check_paired(Z, T)
    check_min_samples(Z.shape[0], 2, "estimate_si")
    z_scaler = Standardizer.fit(Z)
    t_scaler = Standardizer.fit(T)
    Zf = feature_map(z_scaler.transform(Z), slices.theta, poly)
    Tf = feature_map(t_scaler.transform(T), slices.phi, poly)
    solution = solve_cca(Zf, Tf, ridge)
    return SiEstimate(
        statistic=solution.rho,
        solution=solution,
        slices=slices,
        poly=poly,
        z_scaler=z_scaler,
        t_scaler=t_scaler,
    )


def _projections(Z, T, fitted: SiEstimate):
    Z = as_matrix(Z, "Z")
    T = as_matrix(T, "T")
    check_paired(Z, T)
    Zf = feature_map(fitted.z_scaler.transform(Z), fitted.slices.theta, fitted.poly)
    Tf = feature_map(fitted.t_scaler.transform(T), fitted.slices.phi, fitted.poly)
    return Zf @ fitted.solution.w, Tf @ fitted.solution.v


def evaluate_si(Z, T, fitted: SiEstimate) -> float:
    """Correlation of the fitted projections on a (possibly new) batch.

    Applies the stored z-scoring and weights, then returns the batch
    Pearson correlation; the batch may differ from the fitting set.
    """
    Z = as_matrix(Z, "Z")
    check_min_samples(Z.shape[0], 2, "evaluate_si")
    a, b = _projections(Z, T, fitted)
    return pearson(a, b)


def _batch_projection_parts(Z, fitted: SiEstimate):
    """Tanh projections H and the per-slice weight matrix for the Z side."""
    Zs = fitted.z_scaler.transform(as_matrix(Z, "Z"))
    H = np.tanh(Zs @ fitted.slices.theta.T)  # (m, S)
    K = fitted.poly.order
    W = fitted.solution.w.reshape(-1, K)      # (S, K), slice-major layout
    return Zs, H, W, K


def _weighted_power_sum(H, W, K):
    """a[r] = sum_i sum_k W[i, k] * H[r, i]**(k+1)."""
    a = np.zeros(H.shape[0])
    power = H
    for k in range(K):
        a += power @ W[:, k]
        if k + 1 < K:
            power = power * H
    return a


def _power_chain(H, W, K):
    """dA/dH where a = sum W[i,k] H[:,i]^(k+1): sum_k (k+1) W[i,k] H^k."""
    G = np.broadcast_to(W[:, 0], H.shape).copy()
    power = H
    for k in range(1, K):
        G += (k + 1) * W[:, k] * power
        if k + 1 < K:
            power = power * H
    return G


def si_gradient(Z, T, fitted: SiEstimate, return_flag: bool = False):
    """Exact gradient of the batch correlation with respect to Z.

    The fitted weights are constants; the gradient flows through the
    polynomial powers, the tanh squash, the projections and the stored
    z-scoring.  The T side is data and gets no gradient.  A batch in
    which either projection has zero variance is degenerate: the gradient
    is defined as zero and flagged (``return_flag=True`` exposes it).
    """
    T = as_matrix(T, "T")
    Zs, H, W, K = _batch_projection_parts(Z, fitted)
    check_paired(Zs, T)
    a = _weighted_power_sum(H, W, K)
    Tf = feature_map(fitted.t_scaler.transform(T), fitted.slices.phi, fitted.poly)
    b = Tf @ fitted.solution.v

    _, da, _, degenerate = pearson_with_gradient(a, b)
    if degenerate:
        grad = np.zeros((Zs.shape[0], fitted.slices.theta.shape[1]))
    else:
        dH = da[:, None] * _power_chain(H, W, K)
        dP = dH * (1.0 - H * H)
        grad = (dP @ fitted.slices.theta) / fitted.z_scaler.scale[None, :]
    if return_flag:
        return grad, degenerate
    return grad


def slice_direction_gradients(Z, T, fitted: SiEstimate):
    """Gradients of the batch correlation w.r.t. both direction matrices.

    Used by slice refinement.  Weights are held fixed; at the CCA optimum
    this equals the total derivative by the envelope argument.  Returns
    ``(d_theta, d_phi, degenerate)`` with shapes matching theta and phi.
    """
    Zs, H, W, K = _batch_projection_parts(Z, fitted)
    T = as_matrix(T, "T")
    check_paired(Zs, T)
    Ts = fitted.t_scaler.transform(T)
    Ht = np.tanh(Ts @ fitted.slices.phi.T)
    V = fitted.solution.v.reshape(-1, K)
    a = _weighted_power_sum(H, W, K)
    b = _weighted_power_sum(Ht, V, K)
    _, da, db, degenerate = pearson_with_gradient(a, b)
    if degenerate:
        return (np.zeros_like(fitted.slices.theta),
                np.zeros_like(fitted.slices.phi), True)
    dP_z = (da[:, None] * _power_chain(H, W, K)) * (1.0 - H * H)
    dP_t = (db[:, None] * _power_chain(Ht, V, K)) * (1.0 - Ht * Ht)
    return dP_z.T @ Zs, dP_t.T @ Ts, False

"""Small dense symmetric-matrix kernels.

Everything here works on N x N matrices with N in the low tens at most:
a cyclic Jacobi eigensolver, the positive semidefinite square root and
inverse square root built on it, and the orthogonal polar factor used as
the optimal rotation.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, NotPSD, NotSymmetric, RankDeficient

SYMMETRY_TOL = 1e-9
JACOBI_TOL = 1e-12
MAX_SWEEPS = 100
MAX_DIM = 64
PSD_TOL = 1e-10
RANK_TOL = 1e-10


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns


class PolarFactor(NamedTuple):
    rotation: np.ndarray
    det_sign: int
    eigenvalues: np.ndarray  # of Z Z^T, descending
    signs: np.ndarray  # +1, or -1 on the flipped direction
    reflection_corrected: bool

    @property
    def trace(self) -> float:
        """Tr(rotation @ Z.T): sum of singular values of Z, sign-adjusted."""
        roots = np.sqrt(np.clip(self.eigenvalues, 0.0, None))
        return float(np.sum(self.signs * roots))


def _as_square(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _off_norm(a: list[list[float]]) -> float:
    n = len(a)
    return math.sqrt(2.0 * sum(a[p][q] * a[p][q] for p in range(n - 1) for q in range(p + 1, n)))


def sym_eigen(a, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Sweeps continue until the off-diagonal Frobenius norm drops to
    ``tol * ||a||_F``. Eigenvalues come back in descending order with the
    eigenvectors as the matching columns of an orthogonal matrix.
    """
    a = _as_square(a)
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the supported maximum {MAX_DIM}")
    norm = float(np.linalg.norm(a))
    if np.linalg.norm(a - a.T) > SYMMETRY_TOL * norm:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    v = np.eye(n)
    if norm == 0.0:
        return SpectralDecomposition(np.zeros(n), v)
    # work on the unit-norm matrix to keep squared terms clear of under/overflow;
    # plain lists beat numpy per-element overhead at these sizes
    a = (0.5 * (a + a.T) / norm).tolist()
    v = v.tolist()
    rng = range(n)
    for _ in range(max_sweeps):
        if _off_norm(a) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                h = a[q][q] - a[p][p]
                if abs(apq) * 1e36 < abs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                for row in a:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
                ap, aq = a[p], a[q]
                for k in rng:
                    x, y = ap[k], aq[k]
                    ap[k] = c * x - s * y
                    aq[k] = s * x + c * y
                ap[q] = aq[p] = 0.0
                for row in v:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
    else:
        if _off_norm(a) > tol:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.array([a[k][k] for k in rng]) * norm
    v = np.array(v)
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], v[:, order])


def _checked_psd_spectrum(a, psd_tol: float) -> SpectralDecomposition:
    w, p = sym_eigen(a)
    scale = max(float(w[0]), 0.0)
    if w[-1] < -psd_tol * scale or (scale == 0.0 and w[-1] < 0.0):
        raise NotPSD(f"smallest eigenvalue {w[-1]:.3e} is materially negative")
    return SpectralDecomposition(np.clip(w, 0.0, None), p)


def pd_sqrt(a, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Unique positive semidefinite square root of a symmetric PSD matrix."""
    w, p = _checked_psd_spectrum(a, psd_tol)
    root = (p * np.sqrt(w)) @ p.T
    return 0.5 * (root + root.T)


def pd_inv_sqrt(a, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Inverse of :func:`pd_sqrt`; the matrix must be numerically positive definite."""
    w, p = _checked_psd_spectrum(a, PSD_TOL)
    if not w[-1] > rank_tol * w[0]:
        raise RankDeficient("matrix is numerically singular")
    inv = (p / np.sqrt(w)) @ p.T
    return 0.5 * (inv + inv.T)


def polar_factor(z, allow_reflection: bool = False, rank_tol: float = RANK_TOL) -> PolarFactor:
    """Orthogonal polar factor ``(Z Z^T)^{-1/2} Z`` with optional det correction.

    With ``allow_reflection`` off and ``det(Z) < 0`` the eigen-direction of
    ``Z Z^T`` with the smallest eigenvalue is negated before composing, which
    gives the closest proper rotation. On exact ties the last direction after
    the descending sort is the one flipped.
    """
    z = _as_square(z)
    zmax = float(np.max(np.abs(z)))
    if zmax == 0.0:
        raise RankDeficient("cross-covariance is zero")
    # the polar factor is scale free; normalizing keeps Z Z^T representable
    zs = z / zmax
    zzt = zs @ zs.T
    w, p = sym_eigen(0.5 * (zzt + zzt.T))
    if not (w[0] > 0.0 and w[-1] > rank_tol * w[0]):
        raise RankDeficient("cross-covariance is numerically rank deficient")

    inv_roots = 1.0 / np.sqrt(w)
    raw = (p * inv_roots) @ p.T @ zs
    det_sign = 1 if np.linalg.det(raw) > 0.0 else -1

    signs = np.ones_like(w)
    corrected = False
    if det_sign < 0 and not allow_reflection:
        signs[-1] = -1.0
        corrected = True
        rotation = (p * (signs * inv_roots)) @ p.T @ zs
    else:
        rotation = raw
    return PolarFactor(_reorthogonalize(rotation), det_sign, w * zmax**2, signs, corrected)


def _reorthogonalize(q: np.ndarray, max_steps: int = 4) -> np.ndarray:
    """Newton-Schulz steps toward the nearest orthogonal matrix.

    Forming (Z Z^T)^{-1/2} Z squares the conditioning of Z, so a nearly
    singular but accepted Z leaves an orthogonality error well above
    rounding; each step roughly squares that error away.
    """
    eye = np.eye(len(q))
    for _ in range(max_steps):
        gram = q.T @ q - eye
        err = float(np.linalg.norm(gram))
        if err <= 4.0 * np.finfo(float).eps * len(q) or err >= 0.5:
            break
        q = q - 0.5 * q @ gram
    return q


def polar_rotation(z, allow_reflection: bool = False, rank_tol: float = RANK_TOL) -> tuple[np.ndarray, int]:
    """Return ``(Q, det_sign)`` where ``det_sign`` is the sign of ``det(Z)``."""
    f = polar_factor(z, allow_reflection=allow_reflection, rank_tol=rank_tol)
    return f.rotation, f.det_sign

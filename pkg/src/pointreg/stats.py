"""Weighted moments over a sparse table of candidate cross pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroWeightMass
from .symmat import RANK_TOL, sym_eigen

NORMALIZED_TOL = 1e-12


def as_points(points, name: str = "points") -> np.ndarray:
    """Validate and return an ``(M, N)`` float array of coordinates."""
    arr = np.array(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty (M, N) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite coordinates")
    return arr


@dataclass(frozen=True)
class PairTable:
    """Candidate matches ``(i, k)`` with nonnegative weights ``m_ik``.

    Stored as parallel arrays (a sparse triplet list) so pruning is just a
    boolean mask. A point may appear in any number of pairs.
    """

    i: np.ndarray
    k: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.intp).reshape(-1)
        k = np.asarray(self.k, dtype=np.intp).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (len(i) == len(k) == len(w)):
            raise ValueError("pair index and weight arrays differ in length")
        if np.any(i < 0) or np.any(k < 0):
            raise ValueError("pair indices must be nonnegative")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        for name, arr in (("i", i), ("k", k), ("weights", w)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_triplets(cls, triplets) -> "PairTable":
        rows = list(triplets)
        if not rows:
            return cls(np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0))
        i, k, w = zip(*rows)
        return cls(np.array(i), np.array(k), np.array(w, dtype=float))

    @classmethod
    def from_dense(cls, matrix, keep_zeros: bool = False) -> "PairTable":
        """Build from an ``N_U x N_V`` weight matrix, row-major entry order."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("dense weights must be a 2-D matrix")
        ii, kk = np.meshgrid(np.arange(m.shape[0]), np.arange(m.shape[1]), indexing="ij")
        ii, kk, w = ii.ravel(), kk.ravel(), m.ravel()
        if not keep_zeros:
            mask = w != 0.0
            ii, kk, w = ii[mask], kk[mask], w[mask]
        return cls(ii, kk, w)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.i.tolist(), self.k.tolist()))

    def subset(self, mask, weights=None) -> "PairTable":
        """Entries where ``mask`` holds, optionally with replacement weights."""
        mask = np.asarray(mask, dtype=bool)
        w = self.weights[mask] if weights is None else weights
        return PairTable(self.i[mask], self.k[mask], w)

    def to_dense(self, n_u: int, n_v: int) -> np.ndarray:
        out = np.zeros((n_u, n_v))
        np.add.at(out, (self.i, self.k), self.weights)
        return out

    def check_bounds(self, n_u: int, n_v: int) -> None:
        if len(self) and (self.i.max() >= n_u or self.k.max() >= n_v):
            raise IndexError("pair index out of range for the given point sets")


def normalize_weights(table: PairTable) -> PairTable:
    """Scale weights to sum to one, preserving entry order."""
    total = table.total
    if not total > 0.0:
        raise ZeroWeightMass("pair table has no positive weight")
    return PairTable(table.i, table.k, table.weights / total, normalized=True)


@dataclass(frozen=True)
class MomentSummary:
    mean_u: np.ndarray
    mean_v: np.ndarray
    var_u: np.ndarray
    var_v: np.ndarray
    cross_cov: np.ndarray  # Z, rows indexed by V features, columns by U features
    weight_sum: float = 1.0


@dataclass(frozen=True)
class WellPosedness:
    well_posed: bool
    ratio: float  # lambda_min / lambda_max of Z Z^T
    coupling: float  # ||Z||_F / sqrt(sum var_u * sum var_v), in [0, 1]
    eigenvalues: np.ndarray = field(repr=False)

    def __bool__(self) -> bool:
        return self.well_posed


def moments(U, V, table: PairTable) -> MomentSummary:
    """Weighted means, per-feature variances and cross-covariance ``Z``.

    Accumulates in extended precision and subtracts the means before forming
    second moments, which equals ``sum m v u^T - vbar ubar^T`` without the
    cancellation.
    """
    U = as_points(U, "U")
    V = as_points(V, "V")
    if U.shape[1] != V.shape[1]:
        raise DimensionMismatch(f"U has dim {U.shape[1]} but V has dim {V.shape[1]}")
    if not table.normalized:
        raise ValueError("moments() expects a normalized pair table")
    table.check_bounds(len(U), len(V))

    ld = np.longdouble
    w = table.weights.astype(ld)
    total = w.sum()
    if not total > 0:
        raise ZeroWeightMass("pair table has no positive weight")
    u = U[table.i].astype(ld)
    v = V[table.k].astype(ld)
    mean_u = (w @ u) / total
    mean_v = (w @ v) / total
    du = u - mean_u
    dv = v - mean_v
    wdv = dv * w[:, None]
    z = (wdv.T @ du) / total
    var_u = (w @ (du * du)) / total
    var_v = (w @ (dv * dv)) / total

    return MomentSummary(
        mean_u=mean_u.astype(float),
        mean_v=mean_v.astype(float),
        var_u=np.clip(var_u.astype(float), 0.0, None),
        var_v=np.clip(var_v.astype(float), 0.0, None),
        cross_cov=z.astype(float),
        weight_sum=float(total),
    )


def coupling_ratio(summary: MomentSummary) -> float:
    """``||Z||_F / sqrt(sum var_u * sum var_v)``; zero for separable weights."""
    denom = math.sqrt(float(np.sum(summary.var_u)) * float(np.sum(summary.var_v)))
    return float(np.linalg.norm(summary.cross_cov)) / denom if denom > 0.0 else 0.0


def check_well_posed(summary: MomentSummary, rank_tol: float = RANK_TOL) -> WellPosedness:
    """Decide whether ``Z`` determines a unique rotation.

    Ill-posed when ``Z`` is negligible against the variances (separable
    weights make it vanish identically) or when ``Z Z^T`` is numerically
    rank deficient.
    """
    z = summary.cross_cov
    w = sym_eigen(z @ z.T).eigenvalues
    lam_max = float(w[0])
    ratio = float(w[-1] / lam_max) if lam_max > 0.0 else 0.0
    coupling = coupling_ratio(summary)
    ok = lam_max > 0.0 and coupling > rank_tol and float(w[-1]) > rank_tol * lam_max
    return WellPosedness(ok, ratio, coupling, w)

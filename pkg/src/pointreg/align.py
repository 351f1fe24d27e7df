"""Closed-form weighted alignment of two point sets for one pair table.

Rigid mode fits ``u -> L u + t``; similarity mode fits ``u -> s L u + t``
with a single positive scale. Both minimize the weighted sum of squared
pair distances over every entry of the table at once, so no one-to-one
correspondence is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DegenerateSource, DimensionMismatch, IllPosed
from .stats import MomentSummary, PairTable, as_points, check_well_posed, coupling_ratio, moments, normalize_weights
from .symmat import RANK_TOL, polar_factor

Mode = Literal["rigid", "similarity"]
MODES = ("rigid", "similarity")
EMIN_CLAMP = 1e-9


@dataclass(frozen=True)
class Transform:
    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0
    mode: Mode = "rigid"

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(-1)
        if rot.ndim != 2 or rot.shape != (len(t), len(t)):
            raise DimensionMismatch("rotation must be N x N with a length-N translation")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")
        if self.mode == "rigid" and self.scale != 1.0:
            raise ValueError("rigid transforms have unit scale")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls, dim: int, mode: Mode = "rigid") -> "Transform":
        return cls(np.eye(dim), np.zeros(dim), 1.0, mode)

    @property
    def dim(self) -> int:
        return len(self.translation)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.scale * pts @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "scale": self.scale,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transform":
        return cls(np.array(d["rotation"]), np.array(d["translation"]), d.get("scale", 1.0), d.get("mode", "rigid"))


@dataclass(frozen=True)
class AlignmentSolution:
    transform: Transform
    e_min: float
    det_sign: int
    eigenvalues_zzt: np.ndarray
    reflection_corrected: bool
    summary: MomentSummary = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.to_dict(),
            "e_min": self.e_min,
            "det_sign": self.det_sign,
            "eigenvalues_zzt": self.eigenvalues_zzt.tolist(),
            "reflection_corrected": self.reflection_corrected,
        }


def _prepare(U, V, table: PairTable):
    U = as_points(U, "U")
    V = as_points(V, "V")
    if U.shape[1] != V.shape[1]:
        raise DimensionMismatch(f"U has dim {U.shape[1]} but V has dim {V.shape[1]}")
    if not table.normalized:
        table = normalize_weights(table)
    table.check_bounds(len(U), len(V))
    return U, V, table


def cost(U, V, table: PairTable, transform: Transform) -> float:
    """Weighted mean squared distance between transformed U and V over the table."""
    U, V, table = _prepare(U, V, table)
    if transform.dim != U.shape[1]:
        raise DimensionMismatch("transform dimension does not match the point sets")
    diff = transform.apply(U[table.i]) - V[table.k]
    w = table.weights.astype(np.longdouble)
    sq = np.sum(diff.astype(np.longdouble) ** 2, axis=1)
    return float((w @ sq) / w.sum())


def _clamp(e: float) -> float:
    return 0.0 if -EMIN_CLAMP <= e < 0.0 else e


def _data_scale_sq(U, V, table: PairTable) -> float:
    pts = np.vstack([U[table.i], V[table.k]])
    return float(np.sum((pts.max(axis=0) - pts.min(axis=0)) ** 2))


def _solve(U, V, table: PairTable, mode: Mode, allow_reflection: bool, rank_tol: float) -> AlignmentSolution:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    U, V, table = _prepare(U, V, table)
    m = moments(U, V, table)
    sum_var_u = float(np.sum(m.var_u))
    sum_var_v = float(np.sum(m.var_v))

    if mode == "similarity" and not sum_var_u > rank_tol * _data_scale_sq(U, V, table):
        raise DegenerateSource("weighted source points coincide; scale is undetermined")
    if not coupling_ratio(m) > rank_tol:
        raise IllPosed("weights are uncoupled: the cross-covariance vanishes")
    # the polar factor applies the same eigenvalue-ratio rank test
    polar = polar_factor(m.cross_cov, allow_reflection=allow_reflection, rank_tol=rank_tol)
    rot = polar.rotation
    trace = polar.trace

    if mode == "rigid":
        scale = 1.0
        e_min = sum_var_u + sum_var_v - 2.0 * trace
    else:
        # a corrected (det = +1) fit can have zero trace only when every rotation ties
        if not trace > rank_tol * float(np.sum(np.sqrt(polar.eigenvalues))):
            raise IllPosed("no positive scale: the proper-rotation optimum is not unique")
        scale = trace / sum_var_u
        e_min = sum_var_v - trace * trace / sum_var_u
    translation = m.mean_v - scale * rot @ m.mean_u

    return AlignmentSolution(
        transform=Transform(rot, translation, scale, mode),
        e_min=_clamp(e_min),
        det_sign=polar.det_sign,
        eigenvalues_zzt=polar.eigenvalues,
        reflection_corrected=polar.reflection_corrected,
        summary=m,
    )


def solve_rigid(U, V, table: PairTable, allow_reflection: bool = False, rank_tol: float = RANK_TOL) -> AlignmentSolution:
    """Optimal rotation and translation for the weighted pair table."""
    return _solve(U, V, table, "rigid", allow_reflection, rank_tol)


def solve_similarity(
    U, V, table: PairTable, allow_reflection: bool = False, rank_tol: float = RANK_TOL
) -> AlignmentSolution:
    """Optimal rotation, translation and uniform scale.

    The rotation is the same one :func:`solve_rigid` returns; the scale is
    the sign-adjusted trace of ``sqrt(Z Z^T)`` over the total source variance.
    """
    return _solve(U, V, table, "similarity", allow_reflection, rank_tol)


def solve(U, V, table: PairTable, mode: Mode = "rigid", allow_reflection: bool = False, rank_tol: float = RANK_TOL):
    return _solve(U, V, table, mode, allow_reflection, rank_tol)


def solve_labeled(pairs, mode: Mode = "rigid", allow_reflection: bool = False, rank_tol: float = RANK_TOL):
    """Align known correspondences ``(u, v, w)``.

    Equivalent to the unlabeled solver fed a table holding only the given
    pairs, with the weights renormalized to sum to one.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one labeled pair")
    u = as_points([p[0] for p in pairs], "u")
    v = as_points([p[1] for p in pairs], "v")
    w = np.array([p[2] for p in pairs], dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("labeled weights must be positive")
    idx = np.arange(len(pairs))
    return _solve(u, v, PairTable(idx, idx, w), mode, allow_reflection, rank_tol)


def negative_branch_error(U, V, table: PairTable, rank_tol: float = RANK_TOL) -> float:
    """Error of the discarded stationary point ``-(sqrt(Z Z^T))^{-1} Z`` (rigid)."""
    U, V, table = _prepare(U, V, table)
    m = moments(U, V, table)
    if not check_well_posed(m, rank_tol):
        raise IllPosed("weights are uncoupled or the cross-covariance is rank deficient")
    roots = np.sqrt(np.clip(polar_factor(m.cross_cov, True, rank_tol).eigenvalues, 0.0, None))
    return float(np.sum(m.var_u) + np.sum(m.var_v) + 2.0 * np.sum(roots))

"""Synthetic instances with known ground truth, default initial weights, and a
brute-force 2-D verifier.

Randomness comes from ``numpy.random.Generator`` over PCG64 seeded with the
instance seed, so a seed reproduces the same instance everywhere numpy's
PCG64 stream is the same.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .align import Mode, Transform
from .errors import DegenerateSet, InvalidSpec
from .stats import PairTable, as_points, normalize_weights

DEFAULT_KERNEL_SIGMA = 0.5


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random proper rotation (QR of a Gaussian matrix, signs fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_transform(dim: int, rng: np.random.Generator, mode: Mode = "rigid") -> Transform:
    rot = random_rotation(dim, rng)
    t = rng.uniform(-1.0, 1.0, dim)
    s = float(np.exp(rng.uniform(math.log(0.5), math.log(2.0)))) if mode == "similarity" else 1.0
    return Transform(rot, t, s, mode)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic instance.

    ``spurious_pairs`` wrong candidate pairs (drawn without repetition from
    the non-matching cross pairs) are added to the true pairs in the initial
    table; all initial weights are equal.
    """

    dim: int = 2
    n_points: int = 10
    noise_sigma: float = 0.0
    outlier_count: int = 0
    transform: Transform | None = None
    mode: Mode = "rigid"
    seed: int = 0
    bounding_box: tuple[float, float] = (0.0, 1.0)
    spurious_pairs: int = 0

    def validate(self) -> None:
        if self.dim < 1:
            raise InvalidSpec("dim must be at least 1")
        if self.n_points < self.dim + 1:
            raise InvalidSpec("need at least dim + 1 points for a nondegenerate fit")
        if not self.noise_sigma >= 0.0:
            raise InvalidSpec("noise_sigma must be nonnegative")
        if self.outlier_count < 0 or self.spurious_pairs < 0:
            raise InvalidSpec("counts must be nonnegative")
        lo, hi = self.bounding_box
        if not hi > lo:
            raise InvalidSpec("bounding box must have positive extent")
        if self.transform is not None and self.transform.dim != self.dim:
            raise InvalidSpec("ground-truth transform has the wrong dimension")
        n_v = self.n_points + self.outlier_count
        if self.spurious_pairs > self.n_points * n_v - self.n_points:
            raise InvalidSpec("more spurious pairs requested than wrong cross pairs exist")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must fit in 64 bits")


@dataclass(frozen=True)
class SynthInstance:
    U: np.ndarray
    V: np.ndarray
    true_pairs: list[tuple[int, int]]
    ground_truth: Transform
    initial_table: PairTable
    spec: SynthSpec | None = field(default=None, repr=False)


def generate(spec: SynthSpec) -> SynthInstance:
    spec.validate()
    rng = rng_for(spec.seed)
    lo, hi = spec.bounding_box
    truth = spec.transform or random_transform(spec.dim, rng, spec.mode)
    U = rng.uniform(lo, hi, (spec.n_points, spec.dim))
    matched = truth.apply(U)
    if spec.noise_sigma > 0.0:
        matched = matched + rng.normal(0.0, spec.noise_sigma, matched.shape)
    if spec.outlier_count:
        box = truth.apply(rng.uniform(lo, hi, (spec.outlier_count, spec.dim)))
        V = np.vstack([matched, box])
    else:
        V = matched
    true_pairs = [(i, i) for i in range(spec.n_points)]

    i_idx = list(range(spec.n_points))
    k_idx = list(range(spec.n_points))
    if spec.spurious_pairs:
        n_v = len(V)
        wrong = np.array([i * n_v + k for i in range(spec.n_points) for k in range(n_v) if k != i])
        pick = np.sort(rng.choice(wrong, spec.spurious_pairs, replace=False))
        i_idx += (pick // n_v).tolist()
        k_idx += (pick % n_v).tolist()
    table = normalize_weights(PairTable(np.array(i_idx), np.array(k_idx), np.ones(len(i_idx))))
    return SynthInstance(U, V, true_pairs, truth, table, spec)


def _unit_normalize(points, name: str) -> np.ndarray:
    pts = as_points(points, name)
    centered = pts - pts.mean(axis=0)
    rms = math.sqrt(float(np.mean(np.sum(centered**2, axis=1))))
    if rms == 0.0:
        raise DegenerateSet(f"{name} has zero spread")
    return centered / rms


def proximity_weights(U, V, kernel_sigma: float = DEFAULT_KERNEL_SIGMA) -> PairTable:
    """Gaussian-kernel weights on every cross pair after centering and RMS scaling.

    A stand-in for domain-specific match probabilities; it ignores any
    rotation between the sets.
    """
    if not kernel_sigma > 0.0:
        raise ValueError("kernel_sigma must be positive")
    u = _unit_normalize(U, "U")
    v = _unit_normalize(V, "V")
    if u.shape[1] != v.shape[1]:
        raise ValueError("U and V differ in dimension")
    d2 = np.sum((u[:, None, :] - v[None, :, :]) ** 2, axis=-1)
    raw = np.exp(-d2 / (2.0 * kernel_sigma**2))
    return normalize_weights(PairTable.from_dense(raw, keep_zeros=True))


def oracle_grid_2d(U, V, table: PairTable, n_angles: int = 100_000, mode: Mode = "rigid", chunk: int = 4096):
    """Brute-force minimum of the weighted cost over a uniform grid of 2-D rotations.

    For each angle the translation (and, in similarity mode, the scale) is
    set to its conditional optimum and the cost is summed pair by pair.
    Returns ``(angle, best_cost)``.
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape[1] != 2 or V.shape[1] != 2:
        raise ValueError("oracle_grid_2d works on 2-D point sets only")
    w = np.asarray(table.weights, dtype=float)
    w = w / w.sum()
    u = U[table.i]
    v = V[table.k]
    ubar = w @ u
    vbar = w @ v
    du = u - ubar
    dv = v - vbar
    var_u = w @ np.sum(du * du, axis=1)

    best_angle, best = 0.0, math.inf
    angles = np.arange(n_angles) * (2.0 * math.pi / n_angles)
    wdv0, wdv1 = w * dv[:, 0], w * dv[:, 1]
    for start in range(0, n_angles, chunk):
        th = angles[start:start + chunk]
        c, s = np.cos(th), np.sin(th)
        # rotated centered sources, shape (angles, pairs)
        rx = np.outer(c, du[:, 0])
        rx -= np.outer(s, du[:, 1])
        ry = np.outer(s, du[:, 0])
        ry += np.outer(c, du[:, 1])
        if mode == "similarity":
            num = rx @ wdv0 + ry @ wdv1
            scale = np.maximum(num, 0.0) / var_u
            rx *= scale[:, None]
            ry *= scale[:, None]
        # translation v̄ - s L ū aligns the weighted centroids exactly
        rx -= dv[:, 0]
        ry -= dv[:, 1]
        rx *= rx
        ry *= ry
        rx += ry
        costs = rx @ w
        j = int(np.argmin(costs))
        if costs[j] < best:
            best, best_angle = float(costs[j]), float(th[j])
    return best_angle, best

"""Iterative prune-and-realign registration of unlabeled point sets.

Each iteration aligns on the current pair table, drops every pair whose
post-alignment distance exceeds the threshold, reweights the survivors as
``1 - distance / threshold`` and, if nothing was dropped, lowers the
threshold by ``epsilon``. The loop ends once the table holds no more pairs
than ``min(N_U, N_V)``, or the threshold reaches zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Literal

import numpy as np

from .align import MODES, AlignmentSolution, Mode, Transform, solve
from .errors import AllPairsPruned, IllPosed, InvalidConfig, NoAlignment, ZeroWeightMass
from .stats import PairTable, as_points, normalize_weights
from .symmat import RANK_TOL

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_FRACTION = 0.75
DEFAULT_STEPS = 50

Termination = Literal["PairCountReached", "ThresholdExhausted", "IterationCap"]


@dataclass(frozen=True)
class RegistrationConfig:
    """Loop hyper-parameters.

    ``threshold`` and ``epsilon`` left as ``None`` are filled in from the
    data by :meth:`resolve`: three quarters of the diameter of V, and a
    fiftieth of that. ``max_iterations`` defaults to ten times ``ceil(threshold / epsilon)``.
    """

    threshold: float | None = None
    epsilon: float | None = None
    mode: Mode = "rigid"
    allow_reflection: bool = False
    max_iterations: int | None = None
    rank_tol: float = RANK_TOL

    def resolve(self, V) -> "RegistrationConfig":
        threshold = self.threshold
        if threshold is None:
            threshold = DEFAULT_THRESHOLD_FRACTION * diameter(V)
        epsilon = self.epsilon if self.epsilon is not None else threshold / DEFAULT_STEPS
        cfg = replace(self, threshold=float(threshold), epsilon=float(epsilon))
        if cfg.max_iterations is None:
            replace(cfg, max_iterations=1).validate()
            cfg = replace(cfg, max_iterations=10 * threshold_steps(cfg.threshold, cfg.epsilon))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}")
        t, eps = self.threshold, self.epsilon
        if t is None or eps is None or not (math.isfinite(t) and t > 0.0):
            raise InvalidConfig("threshold must be a positive finite number")
        if not 0.0 < eps < t:
            raise InvalidConfig("epsilon must lie strictly between 0 and threshold")
        if self.max_iterations is None or self.max_iterations < 1:
            raise InvalidConfig("max_iterations must be at least 1")
        if not self.rank_tol > 0.0:
            raise InvalidConfig("rank_tol must be positive")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "allow_reflection": self.allow_reflection,
            "max_iterations": self.max_iterations,
            "rank_tol": self.rank_tol,
        }


def diameter(points) -> float:
    """Largest pairwise distance within a point set."""
    pts = as_points(points)
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


STEP_SLACK = Fraction(1, 10**9)


def threshold_steps(threshold: float, epsilon: float) -> int:
    """Number of distinct thresholds visited: ``ceil(threshold / epsilon)``.

    Computed in exact rationals; a ratio within 1e-9 above an integer counts
    as that integer, so ``epsilon = threshold / 50`` gives 50 steps despite
    binary rounding.
    """
    return math.ceil(Fraction(threshold) / Fraction(epsilon) - STEP_SLACK)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    threshold_used: float
    pairs_before: int
    pairs_after: int
    transform: Transform
    e_min: float
    pruned: list[tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "threshold_used": self.threshold_used,
            "pairs_before": self.pairs_before,
            "pairs_after": self.pairs_after,
            "transform": self.transform.to_dict(),
            "e_min": self.e_min,
            "pruned": [list(p) for p in self.pruned],
        }


@dataclass(frozen=True)
class RegistrationResult:
    pairs: PairTable
    transform: Transform | None
    score: float
    converged: bool
    iterations: list[IterationRecord]
    termination: Termination
    final: AlignmentSolution | None = field(default=None, repr=False)
    config: RegistrationConfig | None = None

    @property
    def pair_visits(self) -> int:
        return sum(r.pairs_before for r in self.iterations)


def residual(u, v, transform: Transform) -> float:
    """Euclidean distance between ``transform(u)`` and ``v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(transform.apply(u[None, :])[0] - v))


def residuals(U, V, table: PairTable, transform: Transform) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    return np.linalg.norm(transform.apply(U[table.i]) - V[table.k], axis=1)


def prune_and_reweight(U, V, table: PairTable, transform: Transform, threshold: float):
    """Drop pairs farther apart than ``threshold``; reweight and renormalize the rest.

    Returns ``(table, removed_count)``. A pair exactly at the threshold
    survives with raw weight zero.
    """
    if not threshold > 0.0:
        raise ValueError("threshold must be positive")
    delta = residuals(U, V, table, transform)
    keep = ~(delta > threshold)
    removed = int(np.count_nonzero(~keep))
    if not np.any(keep):
        raise AllPairsPruned(f"every pair lies beyond threshold {threshold:g}")
    raw = 1.0 - delta[keep] / threshold
    try:
        out = normalize_weights(table.subset(keep, raw))
    except ZeroWeightMass as exc:
        raise AllPairsPruned("every surviving pair sits exactly on the threshold") from exc
    return out, removed


def register(U, V, initial_table: PairTable, config: RegistrationConfig | None = None) -> RegistrationResult:
    """Run the prune-and-realign loop from ``initial_table``.

    On convergence the surviving pairs are aligned once more and that fit
    supplies the returned transform and score; otherwise the last loop
    alignment does.
    """
    U = as_points(U, "U")
    V = as_points(V, "V")
    cfg = (config or RegistrationConfig()).resolve(V)
    initial_table.check_bounds(len(U), len(V))
    table = normalize_weights(initial_table)
    capacity = min(len(U), len(V))

    def align(tbl):
        return solve(U, V, tbl, cfg.mode, cfg.allow_reflection, cfg.rank_tol)

    t0 = Fraction(cfg.threshold)
    eps = Fraction(cfg.epsilon)
    steps = threshold_steps(cfg.threshold, cfg.epsilon)
    decrements = 0
    records: list[IterationRecord] = []
    last: AlignmentSolution | None = None
    termination: Termination | None = None

    while len(table) > capacity and decrements < steps:
        if len(records) >= cfg.max_iterations:
            termination = "IterationCap"
            break
        threshold = float(t0 - decrements * eps)
        try:
            sol = align(table)
        except IllPosed:
            if last is None:
                raise
            log.info("surviving weights became ill-posed at iteration %d; stopping", len(records))
            termination = "ThresholdExhausted"
            break
        last = sol
        delta = residuals(U, V, table, sol.transform)
        try:
            new_table, removed = prune_and_reweight(U, V, table, sol.transform, threshold)
        except AllPairsPruned:
            records.append(
                IterationRecord(len(records), threshold, len(table), 0, sol.transform, sol.e_min, table.pairs())
            )
            termination = "ThresholdExhausted"
            break
        dropped = [p for p, d in zip(table.pairs(), delta) if d > threshold]
        records.append(
            IterationRecord(len(records), threshold, len(table), len(new_table), sol.transform, sol.e_min, dropped)
        )
        if removed == 0:
            decrements += 1
        table = new_table

    if termination is None:
        if len(table) <= capacity:
            termination = "PairCountReached"
        elif decrements >= steps:
            termination = "ThresholdExhausted"
        else:
            termination = "IterationCap"

    final = None
    if termination == "PairCountReached":
        try:
            final = align(table)
        except IllPosed:
            if last is None:
                raise
            log.info("final pair table is ill-posed; keeping the last loop alignment")
    best = final or last
    return RegistrationResult(
        pairs=table,
        transform=best.transform if best else None,
        score=best.e_min if best else math.nan,
        converged=termination == "PairCountReached",
        iterations=records,
        termination=termination,
        final=final,
        config=cfg,
    )


def similarity_score(result: RegistrationResult) -> float:
    """Minimum weighted squared error of the final alignment; lower is more similar."""
    if result.transform is None or not math.isfinite(result.score):
        raise NoAlignment("registration produced no successful alignment")
    return result.score

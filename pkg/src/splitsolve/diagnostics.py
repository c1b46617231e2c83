"""Numerical certificates for the product-space operators behind the solver.

The convergence argument rests on three operators on the weighted
product space: a skew coupling map S, a cocoercive map Q collecting C
and the D_i^{-1}, and a self-adjoint strongly positive map V that
renorms the space.  This module materializes them at desk scale and
certifies the claimed properties by seeded sampling; mutation tests in
the suite guard against vacuous passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .solver import ProblemSpec, RunReport, StepConfig
from .spaces import BlockVector, SpaceLayout, inner_weighted

__all__ = [
    "ProductOps",
    "CertificateReport",
    "FejerSeries",
    "build_product_ops",
    "certify_skew",
    "certify_strong_positivity",
    "certify_Q_cocoercive",
    "fejer_monitor",
]

SKEW_TOL = 1e-10
SELFADJ_TOL = 1e-10
POSITIVITY_TOL = 1e-9
COCOERCIVITY_TOL = 1e-9
FEJER_SLACK = 1e-10


@dataclass(frozen=True)
class ProductOps:
    """Product-space maps S, Q, V for one problem/step-size pair.

    ``t_apply`` maps the primal space into the scaled dual product
    (x -> (sqrt(sigma_i) L_i x)); its norm is bounded by
    ``sqrt(t_norm_bound)``.
    """

    layout: SpaceLayout
    S_apply: Callable[[BlockVector], BlockVector]
    Q_apply: Callable[[BlockVector], BlockVector]
    V_apply: Callable[[BlockVector], BlockVector]
    t_apply: Callable[[np.ndarray], tuple[np.ndarray, ...]]
    t_norm_bound: float
    rho: float
    beta: float
    delta: float


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of one sampled certificate."""

    name: str
    passed: bool
    margin: float
    threshold: float
    samples: int
    vacuous: bool = False
    note: str = ""


@dataclass(frozen=True)
class FejerSeries:
    """Distances to the final iterate in the renormed metric."""

    declined: bool
    reason: str
    distances: Optional[np.ndarray]
    max_increase: Optional[float]
    monotone: Optional[bool]


def build_product_ops(spec: ProblemSpec, cfg: StepConfig) -> ProductOps:
    """Materialize S, Q, V for ``spec`` with the steps in ``cfg``."""
    weights = spec.layout.weights
    blocks = spec.blocks
    tau, sigmas = cfg.tau, cfg.sigmas
    if len(sigmas) != len(blocks):
        raise ValueError("config and problem disagree on the number of blocks")

    def adjoint_sum(duals):
        out = np.zeros(spec.layout.dim_primal)
        for w, blk, d in zip(weights, blocks, duals):
            out = out + w * blk.L.adjoint_apply(d)
        return out

    def S_apply(u: BlockVector) -> BlockVector:
        return BlockVector(
            adjoint_sum(u.duals),
            tuple(-blk.L.apply(u.primal) for blk in blocks),
        )

    def Q_apply(u: BlockVector) -> BlockVector:
        return BlockVector(
            spec.C.apply(u.primal),
            tuple(blk.Dinv.apply(d) for blk, d in zip(blocks, u.duals)),
        )

    def V_apply(u: BlockVector) -> BlockVector:
        return BlockVector(
            u.primal / tau - adjoint_sum(u.duals),
            tuple(
                d / s - blk.L.apply(u.primal)
                for s, blk, d in zip(sigmas, blocks, u.duals)
            ),
        )

    def t_apply(x: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(math.sqrt(s) * blk.L.apply(x) for s, blk in zip(sigmas, blocks))

    bound = math.fsum(
        w * s * nm * nm for w, s, nm in zip(weights, sigmas, cfg.norms)
    )
    return ProductOps(
        layout=spec.layout,
        S_apply=S_apply,
        Q_apply=Q_apply,
        V_apply=V_apply,
        t_apply=t_apply,
        t_norm_bound=bound,
        rho=cfg.rho,
        beta=cfg.beta,
        delta=cfg.delta,
    )


def _sample(layout: SpaceLayout, rng) -> BlockVector:
    return BlockVector(
        rng.standard_normal(layout.dim_primal),
        tuple(rng.standard_normal(d) for d in layout.dual_dims),
    )


def certify_skew(ops: ProductOps, samples: int = 100, seed: int = 0) -> CertificateReport:
    """Check <u, S u> = 0 on sampled u (scaled tolerance 1e-10)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = _sample(ops.layout, rng)
        nsq = inner_weighted(u, u, ops.layout)
        val = abs(inner_weighted(u, ops.S_apply(u), ops.layout)) / (1.0 + nsq)
        worst = max(worst, val)
    return CertificateReport("skew(S)", worst <= SKEW_TOL, worst, SKEW_TOL, samples)


def certify_strong_positivity(ops: ProductOps, samples: int = 100,
                              seed: int = 0) -> CertificateReport:
    """Check self-adjointness of V and <u, V u> >= rho ||u||^2.

    With ``rho <= 0`` the positivity bound is vacuous; the report says
    so instead of asserting anything.
    """
    rng = np.random.default_rng(seed)
    worst_adj = 0.0
    worst_pos = math.inf
    for _ in range(samples):
        u = _sample(ops.layout, rng)
        w = _sample(ops.layout, rng)
        vu, vw = ops.V_apply(u), ops.V_apply(w)
        worst_adj = max(
            worst_adj,
            abs(inner_weighted(u, vw, ops.layout) - inner_weighted(vu, w, ops.layout)),
        )
        worst_pos = min(
            worst_pos,
            inner_weighted(u, vu, ops.layout)
            - ops.rho * inner_weighted(u, u, ops.layout),
        )
    if ops.rho <= 0.0:
        return CertificateReport(
            "strong-positivity(V)", False, worst_pos, -POSITIVITY_TOL, samples,
            vacuous=True,
            note=f"rho = {ops.rho:g} <= 0: bound vacuous (inadmissible steps); "
                 f"self-adjointness deviation {worst_adj:.3e}",
        )
    passed = worst_pos >= -POSITIVITY_TOL and worst_adj <= SELFADJ_TOL
    return CertificateReport(
        "strong-positivity(V)", passed, worst_pos, -POSITIVITY_TOL, samples,
        note=f"self-adjointness deviation {worst_adj:.3e} (tol {SELFADJ_TOL:g})",
    )


def certify_Q_cocoercive(ops: ProductOps, beta: Optional[float] = None,
                         samples: int = 100, seed: int = 0) -> CertificateReport:
    """Check <u-w, Qu-Qw> >= beta ||Qu-Qw||^2 on sampled pairs."""
    if beta is None:
        beta = ops.beta
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(samples):
        u = _sample(ops.layout, rng)
        w = _sample(ops.layout, rng)
        qu, qw = ops.Q_apply(u), ops.Q_apply(w)
        dq = BlockVector(qu.primal - qw.primal,
                         tuple(a - b for a, b in zip(qu.duals, qw.duals)))
        du = BlockVector(u.primal - w.primal,
                         tuple(a - b for a, b in zip(u.duals, w.duals)))
        worst = min(
            worst,
            inner_weighted(du, dq, ops.layout)
            - beta * inner_weighted(dq, dq, ops.layout),
        )
    return CertificateReport(
        "cocoercivity(Q)", worst >= -COCOERCIVITY_TOL, worst, -COCOERCIVITY_TOL,
        samples, note=f"beta = {beta:g}",
    )


def fejer_monitor(report: RunReport, ops: ProductOps) -> FejerSeries:
    """Distance-to-final-iterate series in the renormed metric.

    Declines when the run injected errors (summable perturbations break
    exact monotonicity) or did not record its states.
    """
    if report.used_errors:
        return FejerSeries(True, "run injected nonzero errors; monotonicity "
                           "holds only for exact iterations", None, None, None)
    if report.states is None:
        return FejerSeries(True, "run did not record states "
                           "(pass record_states=True)", None, None, None)
    final = report.states[-1]
    dists = []
    for s in report.states:
        d = BlockVector(s.primal - final.primal,
                        tuple(a - b for a, b in zip(s.duals, final.duals)))
        dists.append(math.sqrt(max(inner_weighted(d, ops.V_apply(d), ops.layout), 0.0)))
    dists = np.asarray(dists)
    increases = np.diff(dists)
    max_inc = float(increases.max()) if increases.size else 0.0
    return FejerSeries(False, "", dists, max_inc, bool(max_inc <= FEJER_SLACK))

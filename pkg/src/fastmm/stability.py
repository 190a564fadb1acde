"""Stability quantities of bilinear algorithms and forward-error bounds of plans.

All counts are exact integers and all norms exact rationals; conversion to
floating point happens only when a bound is multiplied by matrix norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .engine import Stationary, UniformNonStationary, as_tree, plan_levels
from .oracle import EPS

__all__ = [
    "StabilityReport", "PlanStabilityReport", "analyze", "bound_stationary",
    "bound_uniform_nonstationary", "analyze_plan", "plan_bound", "tradeoff_point",
    "kron_stability_vector", "report_rows", "REPORT_COLUMNS",
]


def _dnc(count):
    """Accumulation count under divide-and-conquer (pairwise) summation."""
    count = int(count)
    return 1 + math.ceil(math.log2(count)) if count > 1 else count


@dataclass(frozen=True)
class StabilityReport:
    name: str
    dims: tuple
    rank: int
    alpha: tuple
    beta: tuple
    gamma: tuple
    a: tuple
    b: tuple
    q: tuple
    bigQ: int
    e: tuple
    bigE: Fraction
    nnz: int
    legacyE: Fraction
    stab_exponent: float | None

    @property
    def k0(self):
        return self.dims[1]


def analyze(alg, dnc=False):
    """Principal quantities of one algorithm.

    ``dnc=True`` replaces the sequential summation counts in ``q`` by their
    divide-and-conquer counterparts ``1 + ceil(log2(count))``.
    """
    U, V, W = alg.U, alg.V, alg.W
    nzU, nzV, nzW = (U != 0), (V != 0), (W != 0)
    alpha = nzU.sum(axis=0).astype(int)
    beta = nzV.sum(axis=0).astype(int)
    gamma = nzW.sum(axis=1).astype(int)
    a = np.abs(U).sum(axis=0)
    b = np.abs(V).sum(axis=0)
    absW = np.abs(W)

    count = _dnc if dnc else int
    ab = [count(x) + count(y) for x, y in zip(alpha, beta)]
    q = tuple(count(gamma[k]) + max(ab[r] for r in np.flatnonzero(nzW[k]))
              for k in range(W.shape[0]))
    e = tuple(Fraction(x) for x in absW @ (a * b))
    legacy = tuple(Fraction(x) for x in absW @ (alpha * beta).astype(object))
    bigE = max(e)
    m0, k0, n0 = alg.dims
    exponent = math.log(bigE, n0) if m0 == k0 == n0 > 1 else None
    return StabilityReport(
        name=alg.name, dims=alg.dims, rank=alg.rank,
        alpha=tuple(int(x) for x in alpha), beta=tuple(int(x) for x in beta),
        gamma=tuple(int(x) for x in gamma),
        a=tuple(Fraction(x) for x in a), b=tuple(Fraction(x) for x in b),
        q=q, bigQ=max(q), e=e, bigE=bigE,
        nnz=int(nzU.sum() + nzV.sum() + nzW.sum()),
        legacyE=max(legacy), stab_exponent=exponent,
    )


def _check_divisible(K, k0s):
    prod = math.prod(k0s)
    if K % prod:
        raise ValueError(f"inner dimension {K} is not divisible by {prod}")
    return K // prod


def _coefficient(delta, leaf_k, xi):
    return Fraction(delta) * leaf_k * Fraction(xi)


def bound_stationary(report, L, K, normA, normB, eps=EPS, dnc=False):
    """(K/K0^L + Q*L) * (K/K0^L) * E^L * normA * normB * eps."""
    if L < 0:
        raise ValueError("L must be nonnegative")
    leaf = _check_divisible(K, [report.k0] * L)
    acc = _dnc(leaf) if dnc else leaf
    coef = _coefficient(acc + report.bigQ * L, leaf, report.bigE ** L)
    return float(coef) * normA * normB * eps


def bound_uniform_nonstationary(reports, K, normA, normB, eps=EPS, dnc=False):
    """(K/prod K0 + sum Q) * (K/prod K0) * prod E * normA * normB * eps."""
    leaf = _check_divisible(K, [r.k0 for r in reports])
    acc = _dnc(leaf) if dnc else leaf
    xi = math.prod((r.bigE for r in reports), start=Fraction(1))
    coef = _coefficient(acc + sum(r.bigQ for r in reports), leaf, xi)
    return float(coef) * normA * normB * eps


@dataclass(frozen=True)
class PlanStabilityReport:
    delta_max: int
    xi_max: Fraction
    bound_coefficient: Fraction
    leaf_k: int


def analyze_plan(plan, K, dnc=False):
    """delta_max and xi_max of a recursion plan by recursion over its tree.

    delta: along every root-to-leaf path the leaf contributes K/prod(K0), each
    level contributes the S/T accumulation counts alpha_r + beta_r of the
    path's multiplication and the W accumulation count gamma_k of the
    output block; the max over paths feeding an output block distributes over
    levels, so one scalar per node suffices.

    xi: per-output-block products of |w_kr| a_r b_r summed over paths; this
    sum does not distribute over the max, so full vectors over output
    multi-indices are propagated (memoized per shared node).
    """
    tree = as_tree(plan)
    levels = plan_levels(tree)
    k_prefix = [math.prod(d[1] for d in levels[:i]) for i in range(len(levels) + 1)]
    block_counts = [math.prod(d[0] * d[2] for d in levels[i:]) for i in range(len(levels) + 1)]
    for kp in k_prefix:
        if K % kp:
            raise ValueError(f"inner dimension {K} is not divisible by {kp}")
    count = _dnc if dnc else int

    reports = {}

    def report(alg):
        if alg not in reports:
            reports[alg] = analyze(alg)
        return reports[alg]

    delta_memo = {}

    def delta(node, depth):
        if node is None:
            return count(K // k_prefix[depth])
        key = (id(node), depth)
        if key not in delta_memo:
            rep = report(node.alg)
            child = [count(rep.alpha[r]) + count(rep.beta[r]) + delta(c, depth + 1)
                     for r, c in enumerate(node.children)]
            nzW = node.alg.W != 0
            delta_memo[key] = max(
                count(rep.gamma[k]) + max(child[r] for r in np.flatnonzero(nzW[k]))
                for k in range(nzW.shape[0]))
        return delta_memo[key]

    xi_memo = {}

    def xi(node, depth):
        size = block_counts[depth]
        if node is None:
            return np.full(size, Fraction(1), dtype=object)
        key = (id(node), depth)
        if key not in xi_memo:
            rep = report(node.alg)
            absW = np.abs(node.alg.W)
            sub = size // absW.shape[0]
            out = np.zeros((absW.shape[0], sub), dtype=object)
            for r, c in enumerate(node.children):
                weight = rep.a[r] * rep.b[r]
                col = absW[:, r]
                if any(col):
                    out += np.outer(col * weight, xi(c, depth + 1))
            xi_memo[key] = out.reshape(-1)
        return xi_memo[key]

    # shallower classical leaves see a larger inner dimension
    leaf_k = max(K // k_prefix[d] for d in _leaf_depths(tree))
    d_max = delta(tree, 0)
    x_max = Fraction(max(xi(tree, 0)))
    return PlanStabilityReport(d_max, x_max, _coefficient(d_max, leaf_k, x_max), leaf_k)


def _leaf_depths(tree):
    depths = set()
    seen = set()

    def walk(node, depth):
        if node is None:
            depths.add(depth)
            return
        if (id(node), depth) in seen:
            return
        seen.add((id(node), depth))
        for c in node.children:
            walk(c, depth + 1)

    walk(tree, 0)
    return depths


def plan_bound(plan, K, normA, normB, eps=EPS):
    """Forward-error bound on max|C - C_hat| for any plan kind."""
    if plan is None:
        return bound_stationary_classical(K, normA, normB, eps)
    if isinstance(plan, Stationary):
        return bound_stationary(analyze(plan.alg), plan.levels, K, normA, normB, eps)
    if isinstance(plan, UniformNonStationary):
        return bound_uniform_nonstationary([analyze(a) for a in plan.algs], K, normA, normB, eps)
    rep = analyze_plan(plan, K)
    return float(rep.bound_coefficient) * normA * normB * eps


def bound_stationary_classical(K, normA, normB, eps=EPS):
    return float(K) * K * normA * normB * eps


def tradeoff_point(report, L):
    """(fraction of classical flops, stability factor relative to classical)."""
    m0, k0, n0 = report.dims
    return (Fraction(report.rank, m0 * k0 * n0) ** L,
            (Fraction(report.bigE) / k0 ** 2) ** L)


def kron_stability_vector(e1, e2):
    return tuple(x * y for x in e1 for y in e2)


REPORT_COLUMNS = ["name", "m0", "k0", "n0", "R", "nnz", "Q", "E", "legacyE", "stab_exp"]


def _num(x):
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else str(float(x))


def report_rows(report):
    """Flat key/value pairs in :data:`REPORT_COLUMNS` order."""
    m0, k0, n0 = report.dims
    exp = "" if report.stab_exponent is None else f"{report.stab_exponent:.4f}"
    return dict(zip(REPORT_COLUMNS, [report.name, m0, k0, n0, report.rank, report.nnz,
                                     report.bigQ, _num(report.bigE), _num(report.legacyE), exp]))

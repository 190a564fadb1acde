"""Recursive execution of bilinear algorithms under a recursion plan.

Summation order is fixed and sequential everywhere: S_r and T_r accumulate
their terms by ascending block index, C_k accumulates the products M_r by
ascending r, and base-case products accumulate over the inner index in
ascending order. The batched numpy/numba code below preserves that order, so
results are bitwise reproducible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numba
import numpy as np

from .algo_spec import BilinearAlgorithm, get_algorithm

__all__ = [
    "PlanError", "Stationary", "UniformNonStationary", "Tree", "CLASSICAL",
    "as_tree", "plan_levels", "plan_depth", "pad_dims", "plan_from_cutoff",
    "multiply", "multiply_classical", "parse_plan", "format_plan",
]

CLASSICAL = None
"""Plan (or tree child) meaning: multiply with the classical algorithm."""


class PlanError(ValueError):
    """Malformed recursion plan or plan descriptor."""


@dataclass(frozen=True)
class Stationary:
    alg: BilinearAlgorithm
    levels: int

    def __post_init__(self):
        if self.levels < 0:
            raise PlanError("levels must be nonnegative")


@dataclass(frozen=True)
class UniformNonStationary:
    algs: tuple

    def __post_init__(self):
        object.__setattr__(self, "algs", tuple(self.algs))


@dataclass(frozen=True)
class Tree:
    """A node running ``alg``; child ``r`` computes the product M_r.

    Children are :class:`Tree` nodes or ``CLASSICAL``. Other plan kinds passed
    as children are converted to trees.
    """

    alg: BilinearAlgorithm
    children: tuple

    def __post_init__(self):
        children = tuple(as_tree(c) for c in self.children)
        if len(children) != self.alg.rank:
            raise PlanError(f"{self.alg.name} node needs {self.alg.rank} children, "
                            f"got {len(children)}")
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "_hash", hash((self.alg, tuple(map(hash, children)))))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Tree) or self._hash != other._hash:
            return False
        return self.alg == other.alg and self.children == other.children


def as_tree(plan):
    """Normalize any plan to a :class:`Tree` (or ``CLASSICAL``).

    Stationary and uniform plans share one child object per level, which the
    executor and the analyzer exploit.
    """
    if plan is None or isinstance(plan, Tree):
        return plan
    if isinstance(plan, Stationary):
        algs = [plan.alg] * plan.levels
    elif isinstance(plan, UniformNonStationary):
        algs = list(plan.algs)
    else:
        raise PlanError(f"not a recursion plan: {plan!r}")
    node = None
    for alg in reversed(algs):
        node = Tree(alg, (node,) * alg.rank)
    return node


def plan_levels(plan):
    """Base-case dims ``(m0, k0, n0)`` per recursion depth, checked for consistency."""
    levels = []
    seen = set()

    def walk(node, depth):
        if node is None or (id(node), depth) in seen:
            return
        seen.add((id(node), depth))
        if depth == len(levels):
            levels.append(node.alg.dims)
        elif levels[depth] != node.alg.dims:
            raise PlanError(f"depth {depth} mixes base cases {levels[depth]} and {node.alg.dims}")
        for child in node.children:
            walk(child, depth + 1)

    walk(as_tree(plan), 0)
    return levels


def plan_depth(plan):
    return len(plan_levels(plan))


def pad_dims(m, k, n, plan):
    """Smallest (m', k', n') >= (m, k, n) divisible by the plan's base-case products."""
    levels = plan_levels(plan)
    pm = math.prod(d[0] for d in levels)
    pk = math.prod(d[1] for d in levels)
    pn = math.prod(d[2] for d in levels)
    return (-(-m // pm) * pm, -(-k // pk) * pk, -(-n // pn) * pn)


def plan_from_cutoff(alg, m, k, n, cutoff):
    """Stationary plan recursing while every block dimension stays >= cutoff."""
    levels = 0
    while (m // alg.m0 >= cutoff and k // alg.k0 >= cutoff and n // alg.n0 >= cutoff):
        m, k, n = m // alg.m0, k // alg.k0, n // alg.n0
        levels += 1
    return Stationary(alg, levels)


# -- execution ----------------------------------------------------------------

@numba.njit(cache=True)
def _batched_matmul(a, b, c):
    # c must be zeroed; inner index accumulated in ascending order
    for t in range(a.shape[0]):
        for i in range(a.shape[1]):
            for p in range(a.shape[2]):
                x = a[t, i, p]
                for j in range(b.shape[2]):
                    c[t, i, j] += x * b[t, p, j]


def _leaf(a, b, fast):
    if fast:
        return np.matmul(a, b)
    c = np.zeros((a.shape[0], a.shape[1], b.shape[2]))
    _batched_matmul(a, b, c)
    return c


class _Terms:
    """Nonzero coefficients of an algorithm, in summation order."""

    def __init__(self, alg):
        u, v, w = alg.floats
        self.u = [[(i, u[i, r]) for i in np.flatnonzero(u[:, r])] for r in range(alg.rank)]
        self.v = [[(j, v[j, r]) for j in np.flatnonzero(v[:, r])] for r in range(alg.rank)]
        self.w = [[(r, w[k, r]) for r in np.flatnonzero(w[k])] for k in range(w.shape[0])]


_terms_cache = {}


def _terms(alg):
    t = _terms_cache.get(alg)
    if t is None:
        t = _terms_cache[alg] = _Terms(alg)
    return t


def _accumulate(out, terms):
    """out = sum of coef * block, added sequentially in the given order."""
    (blk, c), rest = terms[0], terms[1:]
    if c == 1.0:
        np.copyto(out, blk)
    else:
        np.multiply(blk, c, out=out)
    for blk, c in rest:
        if c == 1.0:
            np.add(out, blk, out=out)
        elif c == -1.0:
            np.subtract(out, blk, out=out)
        else:
            np.add(out, c * blk, out=out)


def _run(node, a, b, fast):
    if node is None:
        return _leaf(a, b, fast)
    alg = node.alg
    m0, k0, n0 = alg.dims
    rank = alg.rank
    nb, m, k = a.shape
    n = b.shape[2]
    mb, kb, nb_ = m // m0, k // k0, n // n0
    a5 = a.reshape(nb, m0, mb, k0, kb)
    b5 = b.reshape(nb, k0, kb, n0, nb_)
    terms = _terms(alg)

    s = np.empty((rank, nb, mb, kb))
    t = np.empty((rank, nb, kb, nb_))
    for r in range(rank):
        _accumulate(s[r], [(a5[:, i % m0, :, i // m0, :], c) for i, c in terms.u[r]])
        _accumulate(t[r], [(b5[:, j % k0, :, j // k0, :], c) for j, c in terms.v[r]])

    groups = {}
    for r, child in enumerate(node.children):
        groups.setdefault(id(child), (child, []))[1].append(r)
    if len(groups) == 1:
        prods = _run(node.children[0], s.reshape(rank * nb, mb, kb),
                     t.reshape(rank * nb, kb, nb_), fast).reshape(rank, nb, mb, nb_)
    else:
        prods = np.empty((rank, nb, mb, nb_))
        for child, rs in groups.values():
            sub = _run(child, s[rs].reshape(len(rs) * nb, mb, kb),
                       t[rs].reshape(len(rs) * nb, kb, nb_), fast)
            prods[rs] = sub.reshape(len(rs), nb, mb, nb_)
    del s, t

    c = np.empty((nb, m, n))
    c5 = c.reshape(nb, m0, mb, n0, nb_)
    for kk, row in enumerate(terms.w):
        _accumulate(c5[:, kk // n0, :, kk % n0, :], [(prods[r], w) for r, w in row])
    return c


def _as_matrix(x, what):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"{what} must be a 2-D matrix")
    return x


def _pad(x, rows, cols):
    if x.shape == (rows, cols):
        return x
    out = np.zeros((rows, cols))
    out[:x.shape[0], :x.shape[1]] = x
    return out


def multiply_classical(a, b, *, fast=False):
    """Classical product with ascending sequential accumulation over the inner index."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return _leaf(a[None], b[None], fast)[0]


def multiply(a, b, plan=CLASSICAL, *, fast=False):
    """Compute ``a @ b`` with the recursion plan, padding with zeros as needed.

    ``fast=True`` uses BLAS at the base case; the summation order there is then
    unspecified and the error bounds need not hold.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    m, k = a.shape
    if k != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    n = b.shape[1]
    tree = as_tree(plan)
    if tree is None:
        return multiply_classical(a, b, fast=fast)
    mp, kp, np_ = pad_dims(m, k, n, tree)
    c = _run(tree, _pad(a, mp, kp)[None], _pad(b, kp, np_)[None], fast)[0]
    return np.ascontiguousarray(c[:m, :n])


# -- plan descriptors ------------------------------------------------------------

_TOKEN = re.compile(r"\s*([(),*]|[^(),*\s]+)")
_STATIONARY = re.compile(r"^(.*):L=(\d+)$")


def _tokenize(text):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PlanError(f"cannot tokenize plan at {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


class _PlanParser:
    def __init__(self, text, resolve):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.resolve = resolve

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise PlanError(f"expected {expected or 'token'}, got {tok!r}")
        self.pos += 1
        return tok

    def plan(self):
        tok = self.take()
        if tok == "classical":
            return CLASSICAL
        if tok in ("seq", "tree") and self.peek() == "(":
            self.take("(")
            alg = self.resolve(self.take())
            items = []
            while self.peek() == ",":
                self.take(",")
                items.extend(self.child() if tok == "tree" else [self.resolve(self.take())])
            self.take(")")
            if tok == "seq":
                return UniformNonStationary((alg, *items))
            return Tree(alg, tuple(items) if items else (CLASSICAL,) * alg.rank)
        m = _STATIONARY.match(tok)
        if m:
            return Stationary(self.resolve(m.group(1)), int(m.group(2)))
        return Stationary(self.resolve(tok), 1)

    def child(self):
        node = as_tree(self.plan())
        count = 1
        if self.peek() == "*":
            self.take("*")
            try:
                count = int(self.take())
            except ValueError:
                raise PlanError("repeat count must be an integer") from None
        return [node] * count


def parse_plan(text, resolve=get_algorithm):
    """Parse a plan descriptor.

    Grammar: ``classical`` | ``<alg>:L=<n>`` | ``<alg>`` (one level) |
    ``seq(<alg>, ...)`` | ``tree(<alg>, <child>, ...)`` where a child is any
    plan optionally followed by ``*<count>``. ``tree(<alg>)`` has classical
    children only.
    """
    p = _PlanParser(text, resolve)
    plan = p.plan()
    if p.peek() is not None:
        raise PlanError(f"trailing input at {p.peek()!r}")
    return plan


def format_plan(plan):
    """Inverse of :func:`parse_plan`."""
    if plan is None:
        return "classical"
    if isinstance(plan, Stationary):
        return f"{plan.alg.name}:L={plan.levels}"
    if isinstance(plan, UniformNonStationary):
        return "seq(" + ", ".join(a.name for a in plan.algs) + ")"
    if isinstance(plan, Tree):
        if all(c is None for c in plan.children):
            return f"tree({plan.alg.name})"
        parts = []
        children = plan.children
        i = 0
        while i < len(children):
            j = i
            while j + 1 < len(children) and children[j + 1] == children[i]:
                j += 1
            text = format_plan(children[i])
            parts.append(text if j == i else f"{text}*{j - i + 1}")
            i = j + 1
        return f"tree({plan.alg.name}, " + ", ".join(parts) + ")"
    raise PlanError(f"not a recursion plan: {plan!r}")

"""Diagonal scaling around fast matrix multiplication.

Outside scaling normalizes rows of A and columns of B by their max-norms and
undoes this on C. Inside scaling rescales the inner dimension so that column
k of A and row k of B have equal max-norms; it needs no undo. Repeated
scaling alternates the two (O and I steps) until a stopping test fires.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import CLASSICAL, multiply

__all__ = [
    "ScalingError", "ScalingConfig", "ScalingState", "StepRecord", "ScalingTrace",
    "MODES", "parse_mode", "round_pow2", "outside_scale", "inside_scale",
    "repeated_scale", "scale", "unscale", "scaled_multiply",
]

MODES = ("none", "outside", "inside", "outside-inside", "inside-outside", "repeated")
_ALIASES = {
    "outside-then-inside": "outside-inside",
    "inside-then-outside": "inside-outside",
}
_FIXED_STEPS = {
    "none": (),
    "outside": ("O",),
    "inside": ("I",),
    "outside-inside": ("O", "I"),
    "inside-outside": ("I", "O"),
}


class ScalingError(ValueError):
    """A scaling precondition failed (all-zero row or column)."""


@dataclass(frozen=True)
class ScalingConfig:
    """``stop_test=False`` runs exactly ``max_steps`` steps of the repeated mode."""

    mode: str = "none"
    first_step: str = "O"
    tau: float = 1.0
    max_steps: int = 50
    pow2: bool = False
    stop_test: bool = True

    def __post_init__(self):
        mode = _ALIASES.get(self.mode, self.mode)
        if mode not in MODES:
            raise ValueError(f"unknown scaling mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if self.first_step not in ("O", "I"):
            raise ValueError("first_step must be 'O' or 'I'")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @property
    def label(self):
        if self.mode == "repeated" and not self.stop_test:
            return f"repeated:{self.max_steps // 2}"
        return self.mode


def parse_mode(text, **kwargs):
    """Config from a mode name; ``repeated:<n>`` means exactly n O/I pairs."""
    name, _, count = text.partition(":")
    if count:
        if _ALIASES.get(name, name) != "repeated":
            raise ValueError(f"only the repeated mode takes a count, got {text!r}")
        kwargs.update(max_steps=2 * int(count), stop_test=False)
    return ScalingConfig(mode=name, **kwargs)


@dataclass
class ScalingState:
    d_a: np.ndarray
    d_b: np.ndarray
    a_scaled: np.ndarray
    b_scaled: np.ndarray
    steps_taken: int = 0
    d_inner: np.ndarray | None = None
    cap_reached: bool = False


@dataclass
class StepRecord:
    """One O or I step. ``factors`` holds (r', s') for O steps and (p,) for I steps.

    ``d_a``, ``d_b``, ``norm_a`` and ``norm_b`` describe the state after the step.
    """

    kind: str
    factors: tuple
    w: float
    tested: bool
    stop: bool
    d_a: np.ndarray
    d_b: np.ndarray
    norm_a: float
    norm_b: float


@dataclass
class ScalingTrace:
    steps: list = field(default_factory=list)
    t0: int | None = None
    stopped: bool = False
    cap_reached: bool = False

    @property
    def last_kind(self):
        return self.steps[-1].kind if self.steps else None


def round_pow2(x):
    """Nearest power of two in log2; exact ties go to the smaller exponent."""
    x = np.asarray(x, dtype=np.float64)
    mant, exp = np.frexp(x)           # x = mant * 2**exp with mant in [0.5, 1)
    up = mant > np.sqrt(0.5)          # log2(mant) > -0.5
    return np.ldexp(1.0, np.where(up, exp, exp - 1))


def _maxabs(x, axis, what):
    m = np.abs(x).max(axis=axis)
    zero = np.flatnonzero(m == 0)
    if zero.size:
        raise ScalingError(f"{what} {int(zero[0])} is all zero")
    return m


def _o_step(a, b, pow2):
    r = _maxabs(a, 1, "row of A")
    s = _maxabs(b, 0, "column of B")
    if pow2:
        r, s = round_pow2(r), round_pow2(s)
    return a / r[:, None], b / s[None, :], r, s


def _i_step(a, b, pow2):
    ca = _maxabs(a, 0, "column of A")
    rb = _maxabs(b, 1, "row of B")
    p = np.sqrt(rb / ca)
    if pow2:
        p = round_pow2(p)
    return a * p[None, :], b / p[:, None], p


def _inputs(a, b):
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a, b


def outside_scale(a, b, pow2=False):
    """D_A = diag(row max-norms of A), D_B = diag(column max-norms of B)."""
    a, b = _inputs(a, b)
    a2, b2, r, s = _o_step(a, b, pow2)
    return ScalingState(r, s, a2, b2, steps_taken=1)


def inside_scale(a, b, pow2=False):
    """D = diag(sqrt(rowmax(B)_k / colmax(A)_k)); A' = A D, B' = D^-1 B."""
    a, b = _inputs(a, b)
    a2, b2, p = _i_step(a, b, pow2)
    return ScalingState(np.ones(a.shape[0]), np.ones(b.shape[1]), a2, b2,
                        steps_taken=1, d_inner=p)


def _log_max(*vectors):
    return float(max(np.abs(np.log(v)).max() for v in vectors))


def _iterate(a, b, kinds, cfg, test):
    d_a = np.ones(a.shape[0])
    d_b = np.ones(b.shape[1])
    d_inner = np.ones(a.shape[1])
    trace = ScalingTrace()
    lo_i, hi_i = (1 + cfg.tau) ** -0.25, (1 + cfg.tau) ** 0.25
    lo_o = (1 + cfg.tau) ** -0.5
    for t, kind in enumerate(kinds, start=1):
        if kind == "O":
            a, b, r, s = _o_step(a, b, cfg.pow2)
            d_a = d_a * r
            d_b = s * d_b
            factors = (r, s)
            ok = r.min() >= lo_o and s.min() >= lo_o
            if trace.t0 is None:
                trace.t0 = t
        else:
            a, b, p = _i_step(a, b, cfg.pow2)
            d_inner = d_inner * p
            factors = (p,)
            ok = p.min() >= lo_i and p.max() <= hi_i
        tested = test and trace.t0 is not None and t > trace.t0
        stop = tested and bool(ok)
        trace.steps.append(StepRecord(
            kind, factors, _log_max(*factors), tested, stop, d_a.copy(), d_b.copy(),
            float(np.abs(a).max()), float(np.abs(b).max())))
        if stop:
            trace.stopped = True
            break
    else:
        trace.cap_reached = test
    state = ScalingState(d_a, d_b, a, b, steps_taken=len(trace.steps),
                         d_inner=d_inner, cap_reached=trace.cap_reached)
    return state, trace


def _kinds(first, count):
    other = "I" if first == "O" else "O"
    return [first if i % 2 == 0 else other for i in range(count)]


def repeated_scale(a, b, cfg):
    """Alternating O/I steps from ``cfg.first_step`` until the stop test or the cap."""
    a, b = _inputs(a, b)
    return _iterate(a, b, _kinds(cfg.first_step, cfg.max_steps), cfg, cfg.stop_test)


def scale(a, b, cfg):
    """Apply the configured scaling; returns ``(state, trace)``."""
    a, b = _inputs(a, b)
    if cfg.mode == "repeated":
        return repeated_scale(a, b, cfg)
    return _iterate(a, b, _FIXED_STEPS[cfg.mode], cfg, False)


def unscale(c, state):
    """C = D_A C' D_B."""
    if np.all(state.d_a == 1) and np.all(state.d_b == 1):
        return c
    return (state.d_a[:, None] * c) * state.d_b[None, :]


def scaled_multiply(a, b, plan=CLASSICAL, cfg=None, *, fast=False):
    """Scale, multiply with ``plan``, and undo the outer scaling."""
    if cfg is None or cfg.mode == "none":
        return multiply(a, b, plan, fast=fast)
    state, _ = scale(a, b, cfg)
    return unscale(multiply(state.a_scaled, state.b_scaled, plan, fast=fast), state)


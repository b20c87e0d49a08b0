"""Rotational profiles f(x2) > 0 and the cutoff pair used by the perturbed family.

A conformal metric f(x2)^2 <.,.> on the cylinder R/2piZ x R is determined by its
profile f.  Two concrete profiles matter here:

* the sphere profile ``f0(t) = 2 e^t / (1 + e^(2t)) = sech(t)``, whose metric is
  the round sphere minus its poles, and
* periodic splices of f0, which descend to tori: f has period L and equals f0
  exactly on ``[-L/2 + eps, L/2 - eps]``, with a smooth positive bridge closing
  the period.

The cutoff pair (chi, eta) localizes a perturbation to a cone of near-circular
covectors: eta is a smooth monotone step that is *bit-exactly* 0 below f0(a1)
and 1 above f0(a0); chi is the sharp indicator of the strip |x2| <= b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBand, InvalidSplice

__all__ = [
    "eval_f0",
    "eval_f0_deriv",
    "eval_h",
    "smooth_step",
    "smooth_step_deriv",
    "SmoothStep",
    "make_eta",
    "CutoffPair",
    "make_cutoffs",
    "RotationalProfile",
    "RoundSphereProfile",
    "SplicedTorusProfile",
    "CallablePeriodicProfile",
    "make_spliced_profile",
    "profile_from_spec",
]


# --- closed forms -----------------------------------------------------------

def eval_f0(t):
    """Sphere profile 2 e^t / (1 + e^(2t)), evaluated overflow-free.

    Factoring out e^(-|t|) gives 2 e^(-|t|) / (1 + e^(-2|t|)), stable for any
    finite t.  The value equals sech(t); the peak is f0(0) = 1 and f0 is even
    and strictly decreasing on [0, inf).
    """
    t = np.asarray(t, dtype=float)
    u = np.exp(-np.abs(t))
    out = 2.0 * u / (1.0 + u * u)
    return out if out.ndim else float(out)


def eval_f0_deriv(t):
    """d f0 / dt = -f0(t) * tanh(t)."""
    t = np.asarray(t, dtype=float)
    out = -eval_f0(t) * np.tanh(t)
    return out if np.ndim(out) else float(out)


def _f0_scalar(t: float) -> float:
    u = math.exp(-abs(t))
    return 2.0 * u / (1.0 + u * u)


def _f0_deriv_scalar(t: float) -> float:
    return -_f0_scalar(t) * math.tanh(t)


def eval_h(t):
    """Antiderivative of f0 with h(0) = 0, i.e. h(t) = 2 arctan(e^t) - pi/2.

    Odd, increasing, with range (-pi/2, pi/2) and h'(t) = f0(t); evaluated as
    sign(t) * (pi/2 - 2 arctan(e^(-|t|))) so large arguments never overflow.
    """
    t = np.asarray(t, dtype=float)
    inner = np.pi / 2.0 - 2.0 * np.arctan(np.exp(-np.abs(t)))
    out = np.where(t < 0, -inner, inner)
    return out if out.ndim else float(out)


# --- smooth step ------------------------------------------------------------

def _bump(u):
    """exp(-1/u) continued by 0 for u <= 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0.0
    with np.errstate(over="ignore"):  # 1/u may overflow for subnormal u; exp(-inf) = 0
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """C-infinity monotone step: exactly 0 for u <= 0 and exactly 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    a = _bump(u)
    b = _bump(1.0 - u)
    out = np.where(u >= 1.0, 1.0, np.where(u <= 0.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out if out.ndim else float(out)


def smooth_step_deriv(u):
    """Derivative of smooth_step; closed form a*b*(1/u^2 + 1/(1-u)^2) / (a+b)^2.

    Where either bump factor underflows to zero the true derivative is far
    below double precision, so 0 is returned (avoids 0 * inf near the ends).
    """
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    with np.errstate(over="ignore"):
        a = np.exp(-1.0 / um)
        b = np.exp(-1.0 / (1.0 - um))
    ok = (a > 0.0) & (b > 0.0)
    val = np.zeros_like(um)
    val[ok] = (
        a[ok] * b[ok] * (1.0 / um[ok] ** 2 + 1.0 / (1.0 - um[ok]) ** 2) / (a[ok] + b[ok]) ** 2
    )
    out[mid] = val
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SmoothStep:
    """Monotone C-infinity ramp from 0 at ``lo`` to 1 at ``hi``."""

    lo: float
    hi: float

    def __call__(self, t):
        return smooth_step((np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo))

    def deriv(self, t):
        width = self.hi - self.lo
        return smooth_step_deriv((np.asarray(t, dtype=float) - self.lo) / width) / width


def make_eta(a0: float, a1: float) -> SmoothStep:
    """Smooth step eta with eta = 0 for t <= f0(a1) and eta = 1 for t >= f0(a0).

    Requires 0 < a0 < a1 so that f0(a1) < f0(a0).
    """
    if not (0.0 < a0 < a1):
        raise InvalidBand(f"need 0 < a0 < a1, got a0={a0!r}, a1={a1!r}")
    return SmoothStep(lo=float(eval_f0(a1)), hi=float(eval_f0(a0)))


@dataclass(frozen=True)
class CutoffPair:
    """Strip indicator chi (|x2| <= b) and ratio step eta for one cone pair.

    chi is kept sharp on purpose: the product chi * eta(ratio) is smooth
    because eta vanishes identically wherever chi jumps.
    """

    a0: float
    a1: float
    b: float
    eta: SmoothStep

    def chi(self, x2):
        x2 = np.asarray(x2, dtype=float)
        out = (np.abs(x2) <= self.b).astype(float)
        return out if out.ndim else float(out)


def make_cutoffs(a0: float, a1: float, b: float) -> CutoffPair:
    if not (0.0 < a0 < a1 < b):
        raise InvalidBand(f"need 0 < a0 < a1 < b, got ({a0!r}, {a1!r}, {b!r})")
    return CutoffPair(a0=float(a0), a1=float(a1), b=float(b), eta=make_eta(a0, a1))


# --- profiles ---------------------------------------------------------------

class RotationalProfile:
    """Base class: positive profile f(x2) with derivative, optionally periodic."""

    kind: str = "abstract"
    period: float | None = None

    def f(self, x2):
        raise NotImplementedError

    def fp(self, x2):
        raise NotImplementedError

    def f_fp_scalar(self, x2: float) -> tuple[float, float]:
        """Scalar fast path for integration inner loops."""
        return float(self.f(x2)), float(self.fp(x2))

    def min_value(self, n_grid: int = 8192) -> float:
        """Dense-grid minimum of f over one period (or a wide window)."""
        if self.period is not None:
            grid = np.linspace(-self.period / 2.0, self.period / 2.0, n_grid)
        else:
            grid = np.linspace(-30.0, 30.0, n_grid)
        return float(np.min(self.f(grid)))

    def to_spec(self) -> dict:
        raise NotImplementedError


class RoundSphereProfile(RotationalProfile):
    """The sphere profile f = f0 on the full cylinder (poles omitted)."""

    kind = "round_sphere"
    period = None

    def f(self, x2):
        return eval_f0(x2)

    def fp(self, x2):
        return eval_f0_deriv(x2)

    def f_fp_scalar(self, x2):
        v = _f0_scalar(x2)
        return v, -v * math.tanh(x2)

    def to_spec(self):
        return {"kind": "round_sphere"}


class SplicedTorusProfile(RotationalProfile):
    """Period-L profile equal to f0 on [-L/2+eps, L/2-eps], bridged near +-L/2.

    The bridge is the convex blend (1-w) f0(s) + w f0(s-L) over
    s in [L/2-eps, L/2+eps], with w the standard smooth step.  Both blend ends
    match f0's full jet (w is flat there), and positivity is automatic because
    the blend interpolates two positive values.
    """

    kind = "spliced"

    def __init__(self, length: float, eps_splice: float):
        if not (0.0 < eps_splice < length / 4.0):
            raise InvalidSplice(
                f"need 0 < eps_splice < L/4, got L={length!r}, eps={eps_splice!r}"
            )
        self.period = float(length)
        self.eps_splice = float(eps_splice)
        self._zone = self.period / 2.0 - self.eps_splice
        grid = np.linspace(-self.period / 2.0, self.period / 2.0, 4096)
        fmin = float(np.min(self.f(grid)))
        if fmin <= 0.0:
            raise InvalidSplice(f"bridge lost positivity (min f = {fmin:.3e})")

    def _reduce(self, x2):
        L = self.period
        return x2 - L * np.round(x2 / L)

    def f(self, x2):
        x2 = np.asarray(x2, dtype=float)
        t = self._reduce(x2)
        out = eval_f0(np.asarray(t))
        out = np.atleast_1d(np.asarray(out, dtype=float))
        t1 = np.atleast_1d(t)
        bridge = np.abs(t1) > self._zone
        if np.any(bridge):
            s = np.where(t1[bridge] < 0, t1[bridge] + self.period, t1[bridge])
            u = (s - self._zone) / (2.0 * self.eps_splice)
            w = smooth_step(u)
            out[bridge] = (1.0 - w) * eval_f0(s) + w * eval_f0(s - self.period)
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def fp(self, x2):
        x2 = np.asarray(x2, dtype=float)
        t = self._reduce(x2)
        out = np.atleast_1d(np.asarray(eval_f0_deriv(np.asarray(t)), dtype=float))
        t1 = np.atleast_1d(t)
        bridge = np.abs(t1) > self._zone
        if np.any(bridge):
            s = np.where(t1[bridge] < 0, t1[bridge] + self.period, t1[bridge])
            u = (s - self._zone) / (2.0 * self.eps_splice)
            w = smooth_step(u)
            dw = smooth_step_deriv(u) / (2.0 * self.eps_splice)
            fa, fb = eval_f0(s), eval_f0(s - self.period)
            da, db = eval_f0_deriv(s), eval_f0_deriv(s - self.period)
            out[bridge] = (1.0 - w) * da + w * db + dw * (fb - fa)
        return out.reshape(np.shape(t)) if np.ndim(t) else float(out[0])

    def f_fp_scalar(self, x2):
        L = self.period
        t = x2 - L * round(x2 / L)
        if abs(t) <= self._zone:
            v = _f0_scalar(t)
            return v, -v * math.tanh(t)
        s = t + L if t < 0 else t
        u = (s - self._zone) / (2.0 * self.eps_splice)
        w = float(smooth_step(u))
        dw = float(smooth_step_deriv(u)) / (2.0 * self.eps_splice)
        fa, fb = _f0_scalar(s), _f0_scalar(s - L)
        da, db = -fa * math.tanh(s), -fb * math.tanh(s - L)
        return (1.0 - w) * fa + w * fb, (1.0 - w) * da + w * db + dw * (fb - fa)

    def to_spec(self):
        return {"kind": "spliced", "L": self.period, "eps": self.eps_splice}


class CallablePeriodicProfile(RotationalProfile):
    """Adapter for synthetic periodic profiles given as callables (tests, demos)."""

    kind = "periodic"

    def __init__(self, f, fp, period: float):
        self._f = f
        self._fp = fp
        self.period = float(period)

    def f(self, x2):
        return self._f(np.asarray(x2, dtype=float))

    def fp(self, x2):
        return self._fp(np.asarray(x2, dtype=float))

    def to_spec(self):
        return {"kind": "periodic", "L": self.period}


def make_spliced_profile(length: float, eps_splice: float) -> SplicedTorusProfile:
    """Build the periodic splice of the sphere profile; see SplicedTorusProfile."""
    return SplicedTorusProfile(length, eps_splice)


def profile_from_spec(spec: dict) -> RotationalProfile:
    kind = spec.get("kind")
    if kind == "round_sphere":
        return RoundSphereProfile()
    if kind == "spliced":
        return SplicedTorusProfile(spec["L"], spec["eps"])
    raise InvalidSplice(f"unknown profile kind {kind!r}")

"""Hamiltonian integration of degree-1 dual metrics on the cotangent bundle.

The canonical equations xdot = dH/dxi, xidot = -dH/dx are integrated in lift
coordinates (x1, x2 never reduced), so traces carry their universal-cover path
for free.  Because the metrics are positively 1-homogeneous, the base speed is
F-unit on *every* level set, hence flow time equals F-arclength.

Conservation of H (always) and of xi1 (x1-symmetric metrics, i.e. all kinds
built here) is monitored at checkpoints and enforced against a configured
drift tolerance; drift is the audited quantity instead of a symplectic scheme,
because the Hamiltonians are piecewise-defined and event location needs dense
output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConeViolation,
    InvariantDrift,
    LiftAmbiguity,
    PoleProximity,
    StepFailure,
    ZeroCovector,
)
from .metrics import CotangentPoint, DualMetric, RotationalDualMetric, cone_membership
from .profiles import RotationalProfile

__all__ = [
    "IntegratorConfig",
    "OrbitTrace",
    "EnsembleTrace",
    "hamiltonian_vector_field",
    "integrate_orbit",
    "integrate_ensemble",
    "compose_commuting_flows",
    "check_periodicity",
    "PeriodicityReport",
    "lift_to_cover",
    "phase_space_distance",
    "circle_difference",
    "metric_x2_period",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive Runge-Kutta settings (order >= 5 methods with dense output)."""

    method: str = "DOP853"
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    invariant_drift_tol: float = 1e-8
    projection: bool = False
    checkpoint_dt: float = 0.1
    x2_cap: float | None = 30.0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0 or self.checkpoint_dt <= 0:
            raise ValueError("max_step and checkpoint_dt must be positive")

    def with_(self, **kw) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, **kw)


DEFAULT_CONFIG = IntegratorConfig()

# Lighter tolerances for large orbit ensembles (statistics, not acceptance).
ENSEMBLE_CONFIG = IntegratorConfig(method="DOP853", rel_tol=1e-9, abs_tol=1e-9)


def metric_x2_period(H: DualMetric) -> float | None:
    """Fundamental x2-period of the metric's base (None on the sphere chart)."""
    inner = getattr(H, "inner", None)
    if inner is not None:
        return metric_x2_period(inner)
    profile = getattr(H, "profile", None)
    return getattr(profile, "period", None)


def hamiltonian_vector_field(H: DualMetric, p) -> np.ndarray:
    """(dH/dxi, -dH/dx) at one state or a batch of states."""
    y = p.array if isinstance(p, CotangentPoint) else np.asarray(p, dtype=float)
    gxi = H.grad_xi(y)
    gx = H.grad_x(y)
    return np.concatenate([gxi, -gx], axis=-1)


@dataclass(frozen=True)
class OrbitTrace:
    """Checkpointed orbit with lift, conserved-quantity log, and reductions."""

    times: np.ndarray
    states: np.ndarray
    h_values: np.ndarray
    h1_values: np.ndarray
    x2_period: float | None = None

    @property
    def lifted_base(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def base_points(self) -> np.ndarray:
        base = self.states[:, :2].copy()
        base[:, 0] %= TWO_PI
        if self.x2_period:
            base[:, 1] %= self.x2_period
        return base

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, i: int) -> CotangentPoint:
        return CotangentPoint.from_array(self.states[i])

    def h_drift(self) -> float:
        return float(np.max(np.abs(self.h_values - self.h_values[0])) / abs(self.h_values[0]))

    def h1_drift(self) -> float:
        scale = max(abs(self.h1_values[0]), abs(self.h_values[0]))
        return float(np.max(np.abs(self.h1_values - self.h1_values[0])) / scale)

    def lift_steps_ok(self) -> bool:
        """Consecutive lifted base points move less than half a period."""
        d = np.abs(np.diff(self.lifted_base, axis=0))
        ok = bool(np.all(d[:, 0] < math.pi))
        if self.x2_period:
            ok = ok and bool(np.all(d[:, 1] < self.x2_period / 2.0))
        return ok

    def to_csv(self, path) -> None:
        base = self.base_points
        cols = (
            self.times,
            base[:, 0],
            base[:, 1],
            self.states[:, 2],
            self.states[:, 3],
            self.states[:, 0],
            self.states[:, 1],
            self.h_values,
            self.h1_values,
        )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x1,x2,xi1,xi2,lift_x1,lift_x2,H,H1\n")
            for i in range(len(self.times)):
                fh.write(",".join(repr(float(col[i])) for col in cols) + "\n")


def _checkpoint_grid(T: float, dt: float) -> np.ndarray:
    n = max(int(abs(T) / dt), 1)
    grid = np.linspace(0.0, T, n + 1)
    return grid


def _cap_event(cap: float):
    def event(t, y):
        return cap - abs(y[1])

    event.terminal = True
    event.direction = -1
    return event


def integrate_orbit(
    H: DualMetric,
    p0,
    T: float,
    config: IntegratorConfig = DEFAULT_CONFIG,
    *,
    enforce_drift: bool = True,
) -> OrbitTrace:
    """Integrate the canonical equations from p0 for flow time T (T < 0 allowed).

    Raises PoleProximity when a sphere-chart orbit reaches the configured |x2|
    cap, InvariantDrift when H (or xi1, for x1-symmetric metrics) drifts beyond
    tolerance, and StepFailure on integrator breakdown.
    """
    y0 = p0.array if isinstance(p0, CotangentPoint) else np.array(p0, dtype=float)
    if math.hypot(y0[2], y0[3]) == 0.0:
        raise ZeroCovector("orbit start has xi = 0")
    h0 = float(H.value(y0))
    if not h0 > 0.0:
        raise ValueError(f"H(p0) = {h0!r} must be positive")

    x2_period = metric_x2_period(H)
    events = []
    if config.x2_cap is not None and x2_period is None:
        events.append(_cap_event(config.x2_cap))

    rhs = H.scalar_rhs()
    t_eval = _checkpoint_grid(T, config.checkpoint_dt)

    if config.projection:
        states = [y0.copy()]
        y = y0.copy()
        for k in range(len(t_eval) - 1):
            seg = solve_ivp(
                rhs,
                (t_eval[k], t_eval[k + 1]),
                y,
                method=config.method,
                rtol=config.rel_tol,
                atol=config.abs_tol,
                max_step=config.max_step,
                events=events or None,
                dense_output=False,
            )
            _check_sol(seg)
            y = seg.y[:, -1].copy()
            y[2:] *= h0 / float(H.value(y))
            states.append(y.copy())
        times = t_eval
        states = np.array(states)
    else:
        sol = solve_ivp(
            rhs,
            (0.0, T),
            y0,
            method=config.method,
            rtol=config.rel_tol,
            atol=config.abs_tol,
            max_step=config.max_step,
            t_eval=t_eval,
            events=events or None,
            dense_output=False,
        )
        _check_sol(sol)
        times = sol.t
        states = sol.y.T.copy()

    h = np.asarray(H.value(states))
    h1 = states[:, 2].copy()
    trace = OrbitTrace(times=times, states=states, h_values=h, h1_values=h1, x2_period=x2_period)
    if enforce_drift:
        if trace.h_drift() > config.invariant_drift_tol:
            raise InvariantDrift("H", trace.h_drift(), config.invariant_drift_tol)
        if H.x1_symmetric and trace.h1_drift() > config.invariant_drift_tol:
            raise InvariantDrift("xi1", trace.h1_drift(), config.invariant_drift_tol)
    return trace


def _check_sol(sol) -> None:
    if sol.status == 1:
        t = float(sol.t_events[0][0])
        raise PoleProximity(t, sol.y_events[0][0])
    if sol.status != 0:
        raise StepFailure(sol.message)


@dataclass(frozen=True)
class EnsembleTrace:
    """Checkpointed states of a whole orbit ensemble: shape (n_times, N, 4)."""

    times: np.ndarray
    states: np.ndarray
    x2_period: float | None = None

    def max_h_drift(self, H: DualMetric) -> float:
        h = np.asarray(H.value(self.states))
        return float(np.max(np.abs(h - h[0]) / np.abs(h[0])))


def integrate_ensemble(
    H: DualMetric,
    states0,
    T: float,
    config: IntegratorConfig = ENSEMBLE_CONFIG,
    *,
    t_eval=None,
) -> EnsembleTrace:
    """Integrate N orbits as one stacked system (shared adaptive step).

    Meant for orbit statistics (entropy clouds, tube ensembles); acceptance
    grade per-orbit runs should use :func:`integrate_orbit`.
    """
    states0 = np.atleast_2d(np.asarray(states0, dtype=float))
    n = states0.shape[0]
    if t_eval is None:
        t_eval = _checkpoint_grid(T, config.checkpoint_dt)
    t_eval = np.asarray(t_eval, dtype=float)

    def rhs(t, flat):
        y = flat.reshape(n, 4)
        gxi = H.grad_xi(y)
        gx = H.grad_x(y)
        return np.concatenate([gxi, -gx], axis=1).reshape(-1)

    sol = solve_ivp(
        rhs,
        (float(t_eval[0]), float(t_eval[-1])),
        states0.reshape(-1),
        method=config.method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        max_step=config.max_step,
        t_eval=t_eval,
    )
    if sol.status != 0:
        raise StepFailure(sol.message)
    states = sol.y.T.reshape(len(t_eval), n, 4)
    return EnsembleTrace(times=sol.t, states=states, x2_period=metric_x2_period(H))


def compose_commuting_flows(
    profile: RotationalProfile,
    alpha: float,
    p0,
    t: float,
    *,
    cone_a: float,
    config: IntegratorConfig = DEFAULT_CONFIG,
) -> CotangentPoint:
    """Flow of H0 + alpha*H1 realized as (H0-flow) o (rigid x1-shift by alpha*t).

    Valid exactly on the invariant cone U_a where the perturbed metric equals
    H0 + alpha*H1; serves as an independent oracle for direct integration of
    the perturbed family there.
    """
    y0 = p0.array if isinstance(p0, CotangentPoint) else np.array(p0, dtype=float)
    if not cone_membership(profile, cone_a, y0):
        raise ConeViolation(f"start state outside U_{cone_a}")
    trace = integrate_orbit(RotationalDualMetric(profile), y0, t, config)
    slack = 1e-9
    inside = cone_membership(profile, cone_a + slack, trace.states)
    if not np.all(inside):
        raise ConeViolation(f"orbit left U_{cone_a} during composition")
    y = trace.final_state.copy()
    y[0] += alpha * t
    return CotangentPoint.from_array(y)


def circle_difference(d, period: float):
    """Signed representative of d modulo period in [-period/2, period/2)."""
    return (np.asarray(d, dtype=float) + period / 2.0) % period - period / 2.0


def phase_space_distance(a, b, x2_period: float | None = None):
    """Distance on T*C with x1 (and optionally x2) compared on the circle."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d1 = circle_difference(a[..., 0] - b[..., 0], TWO_PI)
    if x2_period:
        d2 = circle_difference(a[..., 1] - b[..., 1], x2_period)
    else:
        d2 = a[..., 1] - b[..., 1]
    d3 = a[..., 2] - b[..., 2]
    d4 = a[..., 3] - b[..., 3]
    dist = np.sqrt(d1**2 + d2**2 + d3**2 + d4**2)
    return float(dist) if np.ndim(dist) == 0 else dist


@dataclass(frozen=True)
class PeriodicityReport:
    period: float
    distances: np.ndarray

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))


def check_periodicity(
    H: DualMetric,
    states,
    T: float,
    config: IntegratorConfig = DEFAULT_CONFIG,
) -> PeriodicityReport:
    """Integrate each sample for time T and report phase-space return distances."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    x2_period = metric_x2_period(H)
    dists = np.empty(states.shape[0])
    for i, y0 in enumerate(states):
        trace = integrate_orbit(H, y0, T, config)
        dists[i] = phase_space_distance(trace.final_state, y0, x2_period)
    return PeriodicityReport(period=T, distances=dists)


def lift_to_cover(
    trace_or_base,
    x1_period: float = TWO_PI,
    x2_period: float | None = None,
    *,
    ambiguity_fraction: float = 0.499,
) -> np.ndarray:
    """Continuously unwrap reduced base points across fundamental domains.

    Accepts an OrbitTrace (whose reduced base points are re-lifted, an
    independent route to the stored lift) or a raw (n, 2) array of reduced
    points.  Raises LiftAmbiguity when one step moves at least half a period.
    """
    if isinstance(trace_or_base, OrbitTrace):
        base = trace_or_base.base_points
        if x2_period is None:
            x2_period = trace_or_base.x2_period
    else:
        base = np.asarray(trace_or_base, dtype=float)
    out = np.empty_like(base)
    out[0] = base[0]
    d1 = circle_difference(np.diff(base[:, 0]), x1_period)
    if np.any(np.abs(d1) >= ambiguity_fraction * x1_period):
        raise LiftAmbiguity("x1 step of at least half a period")
    out[1:, 0] = base[0, 0] + np.cumsum(d1)
    if x2_period:
        d2 = circle_difference(np.diff(base[:, 1]), x2_period)
        if np.any(np.abs(d2) >= ambiguity_fraction * x2_period):
            raise LiftAmbiguity("x2 step of at least half a period")
        out[1:, 1] = base[0, 1] + np.cumsum(d2)
    else:
        out[:, 1] = base[:, 1]
    return out

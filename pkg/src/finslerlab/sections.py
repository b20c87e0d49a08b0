"""Transverse annular sections of the flow and their first-return maps.

Two section kinds:

* ``equator_birkhoff`` -- unit covectors over a parallel circle {x2 = x2*}
  (the equator of the sphere model, or a waist/equator circle of a torus),
  crossed with positive x2-velocity;
* ``meridian``        -- unit covectors over a vertical circle {x1 = x1*} of a
  torus, crossed with positive x1-velocity (the component normal to the
  circle; transversality needs the normal component, so crossings are counted
  by its sign).

Annulus coordinates are (s, u): s is position along the base circle in the
arclength of the underlying rotational metric, u in (0, pi) is the euclidean
chart angle between the crossing velocity and the base circle direction.  In
these coordinates the canonical area form restricted to the section is
ds_coordinate x dmomentum (x1 with xi1 on a parallel, x2 with xi2 on a
meridian), which is exactly the flux measure the return map preserves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    BranchMismatch,
    ExtrapolationUnstable,
    NoCrossing,
    NonTransverse,
    NotVanishing,
    StepFailure,
)
from .flow import TWO_PI, DEFAULT_CONFIG, IntegratorConfig, metric_x2_period
from .metrics import DualMetric
from .profiles import RotationalProfile

__all__ = [
    "SectionSpec",
    "ReturnSample",
    "CrossingEvent",
    "AnnulusChart",
    "detect_crossing",
    "first_return",
    "iterate_section_map",
    "SectionOrbit",
    "ensemble_return_step",
    "build_return_map_grid",
    "ReturnRecord",
    "ReturnMapTable",
    "smooth_divide",
    "SmoothQuotient",
    "return_time_boundary_extension",
    "BoundaryExtensionReport",
]


@dataclass(frozen=True)
class SectionSpec:
    """Which annulus to cut, and the detection tolerances."""

    kind: str = "equator_birkhoff"
    x2_star: float = 0.0
    x1_star: float = 0.0
    transversality_tol: float = 1e-6
    max_return_time: float = 8.0
    scan_dt: float = 0.02

    def __post_init__(self):
        if self.kind not in ("equator_birkhoff", "meridian"):
            raise ValueError(f"unknown section kind {self.kind!r}")
        if self.max_return_time <= 0 or self.transversality_tol <= 0:
            raise ValueError("max_return_time and transversality_tol must be positive")

    def to_spec(self) -> dict:
        return {
            "kind": self.kind,
            "x2_star": self.x2_star,
            "x1_star": self.x1_star,
            "transversality_tol": self.transversality_tol,
            "max_return_time": self.max_return_time,
        }


@dataclass(frozen=True)
class ReturnSample:
    point: tuple[float, float]
    image: tuple[float, float]
    tau: float
    lift_displacement: float  # s-displacement in units of full turns


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    state: np.ndarray
    transverse_speed: float
    skipped_tangencies: int = 0


def _metric_profile(H: DualMetric) -> RotationalProfile:
    inner = getattr(H, "inner", None)
    if inner is not None:
        return _metric_profile(inner)
    profile = getattr(H, "profile", None)
    if profile is None:
        raise ValueError("metric does not expose a rotational profile")
    return profile


class AnnulusChart:
    """(s, u) coordinates on one section, with state conversions."""

    def __init__(self, H: DualMetric, spec: SectionSpec):
        self.H = H
        self.spec = spec
        self.profile = _metric_profile(H)
        if spec.kind == "equator_birkhoff":
            self._f_star = float(self.profile.f(spec.x2_star))
            self.circumference = TWO_PI * self._f_star
        else:
            period = self.profile.period
            if period is None:
                raise ValueError("meridian sections need a periodic (torus) profile")
            grid = np.linspace(0.0, period, 65537)
            f = np.asarray(self.profile.f(grid))
            s = np.concatenate([[0.0], np.cumsum((f[1:] + f[:-1]) * np.diff(grid) / 2.0)])
            self._x2_grid = grid
            self._s_grid = s
            self.circumference = float(s[-1])

    # --- crossing geometry ----------------------------------------------

    def coordinate(self, states) -> np.ndarray:
        """Signed transverse coordinate whose upward zero-crossings are events."""
        states = np.asarray(states, dtype=float)
        if self.spec.kind == "equator_birkhoff":
            return states[..., 1] - self.spec.x2_star
        return states[..., 0] - self.spec.x1_star

    def transverse_velocity(self, states) -> np.ndarray:
        v = self.H.grad_xi(np.asarray(states, dtype=float))
        return v[..., 1] if self.spec.kind == "equator_birkhoff" else v[..., 0]

    @property
    def periodic_levels(self) -> float | None:
        """Spacing of equivalent crossing levels in the lift (None: single level).

        A meridian circle repeats every 2 pi in the x1-lift; a parallel circle
        repeats every profile period in the x2-lift on a torus, and is a
        single level on the sphere chart.
        """
        if self.spec.kind == "meridian":
            return TWO_PI
        return self.profile.period

    # --- (s, u) conversions ----------------------------------------------

    def lift_s(self, state) -> float:
        state = np.asarray(state, dtype=float)
        if self.spec.kind == "equator_birkhoff":
            return float(state[0]) * self._f_star
        period = self.profile.period
        wraps = math.floor(state[1] / period)
        rem = state[1] - wraps * period
        return wraps * self.circumference + float(np.interp(rem, self._x2_grid, self._s_grid))

    def state_to_point(self, state) -> tuple[float, float]:
        state = np.asarray(state, dtype=float)
        v = self.H.grad_xi(state)
        if self.spec.kind == "equator_birkhoff":
            u = math.atan2(v[1], v[0])
        else:
            u = math.atan2(v[0], v[1])
        return self.lift_s(state) % self.circumference, u

    def points_of_states(self, states) -> np.ndarray:
        """Vectorized (s, u) coordinates of a batch of on-section states."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        v = self.H.grad_xi(states)
        if self.spec.kind == "equator_birkhoff":
            s = (states[:, 0] * self._f_star) % self.circumference
            u = np.arctan2(v[:, 1], v[:, 0])
        else:
            period = self.profile.period
            rem = states[:, 1] % period
            s = np.interp(rem, self._x2_grid, self._s_grid)
            u = np.arctan2(v[:, 0], v[:, 1])
        return np.stack([s, u], axis=1)

    def point_to_state(self, s: float, u: float, level: float = 1.0) -> np.ndarray:
        """State on {H = level} at annulus coordinates (s, u)."""
        if self.spec.kind == "equator_birkhoff":
            x1 = s / self._f_star
            x2 = self.spec.x2_star
            target = u  # velocity angle measured from e1
        else:
            x1 = self.spec.x1_star
            x2 = float(np.interp(s % self.circumference, self._s_grid, self._x2_grid))
            target = math.pi / 2.0 - u  # velocity angle from e1; u measured from e2
        theta = self._covector_angle_for_direction(x1, x2, target)
        y = np.array([x1, x2, math.cos(theta), math.sin(theta)])
        y[2:] *= level / float(self.H.value(y))
        return y

    def _covector_angle_for_direction(self, x1, x2, target_angle):
        def mismatch(theta):
            v = self.H.grad_xi(np.array([x1, x2, math.cos(theta), math.sin(theta)]))
            d = math.atan2(v[1], v[0]) - target_angle
            return (d + math.pi) % TWO_PI - math.pi

        lo, hi = target_angle - 1.0, target_angle + 1.0
        flo, fhi = mismatch(lo), mismatch(hi)
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if flo * fhi > 0.0:
            raise ValueError("could not bracket the covector direction")
        return brentq(mismatch, lo, hi, xtol=1e-14)

    def symplectic_coords(self, state) -> tuple[float, float]:
        """Coordinates (position lift, conjugate momentum) of the flux area form."""
        state = np.asarray(state, dtype=float)
        if self.spec.kind == "equator_birkhoff":
            return float(state[0]), float(state[2])
        return float(state[1]), float(state[3])


# --- crossing detection -------------------------------------------------


def _chart_cap_events(H: DualMetric, config: IntegratorConfig):
    """Pole-cap event list for sphere-chart runs (empty on periodic bases)."""
    if config.x2_cap is None or metric_x2_period(H) is not None:
        return None
    cap = config.x2_cap

    def event(t, y):
        return cap - abs(y[1])

    event.terminal = True
    event.direction = -1
    return [event]


def _solve_dense(H, y0, t_span, config, *, where: str):
    sol = solve_ivp(
        H.scalar_rhs(),
        t_span,
        y0,
        method=config.method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        max_step=config.max_step,
        dense_output=True,
        events=_chart_cap_events(H, config),
    )
    if sol.status == 1:
        raise NoCrossing(f"orbit left the chart strip during {where}")
    if sol.status != 0:
        raise StepFailure(sol.message)
    return sol


def detect_crossing(
    H: DualMetric,
    start_state,
    spec: SectionSpec,
    config: IntegratorConfig = DEFAULT_CONFIG,
    *,
    chart: AnnulusChart | None = None,
    t_max: float | None = None,
    t_skip: float = 1e-9,
) -> CrossingEvent:
    """First transverse upward crossing of the section after t_skip.

    Near-tangent candidates (transverse speed below tolerance) are skipped and
    counted; NoCrossing is raised when the time budget runs out or the orbit
    escapes the sphere chart toward a pole.
    """
    chart = chart or AnnulusChart(H, spec)
    if t_max is None:
        t_max = spec.max_return_time
    y0 = np.asarray(start_state, dtype=float)
    sol = _solve_dense(H, y0, (0.0, t_max), config, where="crossing detection")

    ts = np.arange(t_skip, t_max, spec.scan_dt)
    if ts[-1] < t_max:
        ts = np.append(ts, t_max)
    path = sol.sol(ts).T
    coord = chart.coordinate(path)
    level_spacing = chart.periodic_levels
    skipped = 0
    for i in range(len(ts) - 1):
        g0, g1 = coord[i], coord[i + 1]
        if level_spacing is None:
            level = 0.0
            crossing = g0 < 0.0 <= g1
        else:
            k0 = math.floor(g0 / level_spacing)
            k1 = math.floor(g1 / level_spacing)
            if k1 <= k0:
                continue
            level = k1 * level_spacing
            crossing = True
        if not crossing:
            continue

        def shifted(t, lv=level):
            return float(chart.coordinate(sol.sol(t))) - lv

        a, b = float(ts[i]), float(ts[i + 1])
        fa, fb = shifted(a), shifted(b)
        if fa == 0.0:
            t_event = a
        elif fb == 0.0:
            t_event = b
        else:
            t_event = brentq(shifted, a, b, xtol=1e-13, rtol=8.9e-16)
        state = sol.sol(t_event)
        speed = float(chart.transverse_velocity(state))
        if speed < spec.transversality_tol:
            skipped += 1
            continue
        return CrossingEvent(
            time=float(t_event),
            state=np.asarray(state, dtype=float),
            transverse_speed=speed,
            skipped_tangencies=skipped,
        )
    raise NoCrossing(
        f"no transverse crossing within t = {t_max} ({skipped} tangencies skipped)"
    )


def first_return(
    H: DualMetric,
    spec: SectionSpec,
    point: tuple[float, float],
    config: IntegratorConfig = DEFAULT_CONFIG,
    *,
    chart: AnnulusChart | None = None,
) -> ReturnSample:
    """Return sample of one interior annulus point under the flow."""
    chart = chart or AnnulusChart(H, spec)
    s, u = float(point[0]), float(point[1])
    y0 = chart.point_to_state(s, u)
    v0 = float(chart.transverse_velocity(y0))
    if v0 < spec.transversality_tol:
        raise NonTransverse(
            f"start point (s={s:.6f}, u={u:.6f}) has transverse speed {v0:.3e}"
        )
    event = detect_crossing(H, y0, spec, config, chart=chart, t_skip=spec.scan_dt)
    s_img, u_img = chart.state_to_point(event.state)
    lift_ds = (chart.lift_s(event.state) - chart.lift_s(y0)) / chart.circumference
    return ReturnSample(point=(s, u), image=(s_img, u_img), tau=event.time, lift_displacement=lift_ds)


@dataclass(frozen=True)
class SectionOrbit:
    """n iterates of the return map along one flow orbit."""

    points: np.ndarray  # (n+1, 2) reduced (s, u)
    lift_s: np.ndarray  # (n+1,) continuous s-lift in arclength units
    times: np.ndarray  # (n+1,) crossing flow times (first entry 0)
    circumference: float

    @property
    def displacements(self) -> np.ndarray:
        """Per-iterate lift displacements in units of full turns."""
        return np.diff(self.lift_s) / self.circumference


def iterate_section_map(
    H: DualMetric,
    spec: SectionSpec,
    start_point: tuple[float, float],
    n: int,
    config: IntegratorConfig = DEFAULT_CONFIG,
    *,
    window: float | None = None,
) -> SectionOrbit:
    """Harvest n successive returns from one continuous orbit integration.

    The orbit is integrated in dense-output windows and every transverse
    upward crossing inside a window is refined; this keeps the per-iterate
    cost near one flow period even for thousands of iterates.
    """
    chart = AnnulusChart(H, spec)
    y = chart.point_to_state(*start_point)
    if float(chart.transverse_velocity(y)) < spec.transversality_tol:
        raise NonTransverse("start point is not transverse")
    if window is None:
        window = 16.0 * spec.max_return_time
    level_spacing = chart.periodic_levels

    points = [chart.state_to_point(y)]
    lift = [chart.lift_s(y)]
    times = [0.0]
    t_base = 0.0
    guard = 0
    while len(times) <= n:
        guard += 1
        if guard > max(4, 4 * int(n * spec.max_return_time / window) + 4):
            raise NoCrossing(f"return rate too low: {len(times) - 1} of {n} found")
        sol = _solve_dense(H, y, (0.0, window), config, where="return-map iteration")
        ts = np.arange(spec.scan_dt if t_base == 0.0 else 0.0, window, spec.scan_dt)
        coord = chart.coordinate(sol.sol(ts).T)
        prev_t = times[-1] - t_base
        # bracket every upward crossing in the window, then refine all of
        # them together by vectorized bisection on the dense output
        if level_spacing is None:
            hits = np.nonzero((coord[:-1] < 0.0) & (coord[1:] >= 0.0))[0]
            levels = np.zeros(len(hits))
        else:
            k = np.floor(coord / level_spacing)
            hits = np.nonzero(k[1:] > k[:-1])[0]
            levels = k[hits + 1] * level_spacing
        if len(hits):
            lo = ts[hits].astype(float)
            hi = ts[hits + 1].astype(float)
            for _ in range(54):
                mid = 0.5 * (lo + hi)
                vals = chart.coordinate(sol.sol(mid).T) - levels
                neg = vals < 0.0
                lo = np.where(neg, mid, lo)
                hi = np.where(neg, hi, mid)
            t_events = 0.5 * (lo + hi)
            states_ev = sol.sol(t_events).T
            speeds = chart.transverse_velocity(states_ev)
            pts = chart.points_of_states(states_ev)
            for j in range(len(t_events)):
                if len(times) > n:
                    break
                if t_events[j] <= prev_t or speeds[j] < spec.transversality_tol:
                    continue
                points.append((float(pts[j, 0]), float(pts[j, 1])))
                lift.append(chart.lift_s(states_ev[j]))
                times.append(t_base + float(t_events[j]))
        y = sol.y[:, -1].copy()
        t_base += window
    return SectionOrbit(
        points=np.array(points[: n + 1]),
        lift_s=np.array(lift[: n + 1]),
        times=np.array(times[: n + 1]),
        circumference=chart.circumference,
    )


def ensemble_return_step(
    H: DualMetric,
    spec: SectionSpec,
    states,
    config: IntegratorConfig,
    *,
    chart: AnnulusChart | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One return-map step for a whole cloud of section states (statistics tier).

    Integrates the stacked system once, then locates each orbit's first upward
    crossing on a shared scan grid and refines it with the grid's cubic
    Hermite interpolant.  Returns (new_states, taus, ok_mask); failed orbits
    keep their input state and tau = nan.
    """
    chart = chart or AnnulusChart(H, spec)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    m = int(spec.max_return_time / spec.scan_dt) + 1
    ts = np.linspace(0.0, spec.max_return_time, m)

    def rhs(t, flat):
        y = flat.reshape(n, 4)
        gxi = H.grad_xi(y)
        gx = H.grad_x(y)
        return np.concatenate([gxi, -gx], axis=1).reshape(-1)

    sol = solve_ivp(
        rhs,
        (0.0, float(ts[-1])),
        states.reshape(-1),
        method=config.method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        t_eval=ts,
    )
    if sol.status != 0:
        raise StepFailure(sol.message)
    path = sol.y.T.reshape(m, n, 4)
    vel = np.empty((m, n, 4))
    gxi = H.grad_xi(path.reshape(-1, 4)).reshape(m, n, 2)
    gx = H.grad_x(path.reshape(-1, 4)).reshape(m, n, 2)
    vel[..., :2] = gxi
    vel[..., 2:] = -gx

    coord = chart.coordinate(path)  # (m, n)
    dcoord = vel[..., 1] if spec.kind == "equator_birkhoff" else vel[..., 0]
    level_spacing = chart.periodic_levels
    if level_spacing is None:
        up = (coord[:-1] < 0.0) & (coord[1:] >= 0.0)
        levels = np.zeros_like(coord[:-1])
    else:
        k = np.floor(coord / level_spacing)
        up = k[1:] > k[:-1]
        levels = k[1:] * level_spacing
    # row 0 only ever flags the start point itself (states arrive on-section)
    up[0] = False

    new_states = states.copy()
    taus = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)
    first_idx = np.argmax(up, axis=0)
    has = up[first_idx, np.arange(n)]
    dt = float(ts[1] - ts[0])
    for j in np.nonzero(has)[0]:
        i = first_idx[j]
        g0 = coord[i, j] - levels[i, j]
        g1 = coord[i + 1, j] - levels[i, j]
        d0 = dcoord[i, j] * dt
        d1 = dcoord[i + 1, j] * dt
        # cubic Hermite root of the transverse coordinate on [0, 1]
        x = g0 / (g0 - g1) if g1 != g0 else 0.5
        for _ in range(12):
            h00 = 2 * x**3 - 3 * x**2 + 1
            h10 = x**3 - 2 * x**2 + x
            h01 = -2 * x**3 + 3 * x**2
            h11 = x**3 - x**2
            val = h00 * g0 + h10 * d0 + h01 * g1 + h11 * d1
            dh = (
                (6 * x**2 - 6 * x) * g0
                + (3 * x**2 - 4 * x + 1) * d0
                + (-6 * x**2 + 6 * x) * g1
                + (3 * x**2 - 2 * x) * d1
            )
            if dh == 0.0:
                break
            step = val / dh
            x = min(max(x - step, 0.0), 1.0)
            if abs(step) < 1e-14:
                break
        h00 = 2 * x**3 - 3 * x**2 + 1
        h10 = x**3 - 2 * x**2 + x
        h01 = -2 * x**3 + 3 * x**2
        h11 = x**3 - x**2
        y_ev = (
            h00 * path[i, j]
            + h10 * vel[i, j] * dt
            + h01 * path[i + 1, j]
            + h11 * vel[i + 1, j] * dt
        )
        speed = float(chart.transverse_velocity(y_ev))
        if speed < spec.transversality_tol:
            continue
        new_states[j] = y_ev
        taus[j] = ts[i] + x * dt
        ok[j] = True
    return new_states, taus, ok


# --- return-map tables -------------------------------------------------------


@dataclass(frozen=True)
class ReturnRecord:
    s: float
    u: float
    s_image: float = math.nan
    u_image: float = math.nan
    tau: float = math.nan
    lift_ds: float = math.nan
    status: str = "ok"


@dataclass(frozen=True)
class ReturnMapTable:
    records: list[ReturnRecord]
    circumference: float

    def ok_records(self) -> list[ReturnRecord]:
        return [r for r in self.records if r.status == "ok"]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("s,u,s_image,u_image,tau,lift_ds,status\n")
            for r in self.records:
                fh.write(
                    f"{r.s!r},{r.u!r},{r.s_image!r},{r.u_image!r},"
                    f"{r.tau!r},{r.lift_ds!r},{r.status}\n"
                )


def build_return_map_grid(
    H: DualMetric,
    spec: SectionSpec,
    s_values,
    u_values,
    config: IntegratorConfig = DEFAULT_CONFIG,
) -> ReturnMapTable:
    """Tabulate the return map on a grid; failures are recorded, not raised."""
    chart = AnnulusChart(H, spec)
    records = []
    for s in np.asarray(s_values, dtype=float):
        for u in np.asarray(u_values, dtype=float):
            try:
                sample = first_return(H, spec, (s, u), config, chart=chart)
            except (NoCrossing, NonTransverse) as err:
                records.append(
                    ReturnRecord(s=float(s), u=float(u), status=type(err).__name__)
                )
            else:
                records.append(
                    ReturnRecord(
                        s=float(s),
                        u=float(u),
                        s_image=sample.image[0],
                        u_image=sample.image[1],
                        tau=sample.tau,
                        lift_ds=sample.lift_displacement,
                        status="ok",
                    )
                )
    return ReturnMapTable(records=records, circumference=chart.circumference)


# --- smooth division ---------------------------------------------------------


class SmoothQuotient:
    """G(x, t) = F(x, t) / t continued smoothly through t = 0.

    Away from t = 0 the direct quotient is used; inside |t| <= t_switch the
    value comes from a Taylor model of F in t (least-squares polynomial fit on
    a fixed node set), whose coefficient shift realizes
    d^k G(x, 0) = d^(k+1) F(x, 0) / (k + 1).
    """

    def __init__(self, F, order: int = 2, *, t_switch: float = 1e-3, t_fit: float | None = None,
                 branch_tol: float = 1e-8, vanish_tol: float = 1e-12):
        self.F = F
        self.order = int(order)
        self.t_switch = float(t_switch)
        self.t_fit = float(t_fit) if t_fit is not None else max(64.0 * t_switch, 0.064)
        self.branch_tol = float(branch_tol)
        self.vanish_tol = float(vanish_tol)
        self.degree = self.order + 4
        self._cache: dict = {}

    def _coeffs(self, x):
        key = x if np.isscalar(x) or isinstance(x, tuple) else tuple(np.ravel(x))
        if key in self._cache:
            return self._cache[key]
        nodes = np.linspace(-1.0, 1.0, 2 * self.degree + 7)
        vals = np.array([self.F(x, float(tau * self.t_fit)) for tau in nodes])
        scale = max(1.0, float(np.max(np.abs(vals))))
        f0 = float(self.F(x, 0.0))
        if abs(f0) > self.vanish_tol * scale:
            raise NotVanishing(f"F(x, 0) = {f0!r} does not vanish")
        a = np.polynomial.polynomial.polyfit(nodes, vals, self.degree)
        coeffs = a / self.t_fit ** np.arange(self.degree + 1)
        # the two branches must agree where they hand over
        t = self.t_switch
        for sign in (1.0, -1.0):
            taylor = float(np.polynomial.polynomial.polyval(sign * t, coeffs[1:]))
            direct = float(self.F(x, sign * t)) / (sign * t)
            if abs(taylor - direct) > self.branch_tol * max(1.0, abs(direct)):
                raise BranchMismatch(
                    f"branches differ by {abs(taylor - direct):.3e} at |t| = {t}"
                )
        self._cache[key] = coeffs
        return coeffs

    def __call__(self, x, t: float) -> float:
        t = float(t)
        if abs(t) > self.t_switch:
            return float(self.F(x, t)) / t
        coeffs = self._coeffs(x)
        return float(np.polynomial.polynomial.polyval(t, coeffs[1:]))

    def dt_at_zero(self, x, k: int) -> float:
        """k-th t-derivative of G at (x, 0), from the Taylor model."""
        if k > self.order + 2:
            raise ValueError(f"requested derivative {k} beyond model order")
        coeffs = self._coeffs(x)
        return math.factorial(k) * float(coeffs[k + 1])


def smooth_divide(F, order: int = 2, **kwargs) -> SmoothQuotient:
    """Construct the smooth continuation of F(x, t)/t; see SmoothQuotient."""
    return SmoothQuotient(F, order=order, **kwargs)


# --- boundary extension of the return time -----------------------------------


@dataclass(frozen=True)
class BoundaryExtensionReport:
    angles: np.ndarray
    taus: np.ndarray
    tau_boundary: float  # root of the smooth quotient at angle 0
    tau_polyfit: float  # polynomial extrapolation of the tau samples
    residual: float  # max absolute residual of the polynomial model
    branch_gap: float  # |tau_boundary - tau_polyfit|


def return_time_boundary_extension(
    H: DualMetric,
    spec: SectionSpec,
    config: IntegratorConfig = DEFAULT_CONFIG,
    *,
    s0: float = 0.0,
    angles=None,
    poly_degree: int = 3,
    residual_tol: float = 1e-4,
) -> BoundaryExtensionReport:
    """Extend the first-return time to the annulus boundary (angle u -> 0).

    Two routes that must agree: (a) polynomial extrapolation of tau along a
    geometric approach u_j -> 0, with the model residual as a smoothness
    proxy; (b) division of the transverse coordinate x(tau; u) by the angle u
    via the smooth quotient, whose zero in tau at u = 0 *is* the boundary
    return time.
    """
    chart = AnnulusChart(H, spec)
    if angles is None:
        angles = 2.0 ** -np.arange(3, 11)
    angles = np.asarray(angles, dtype=float)
    if len(angles) < poly_degree + 2 or not np.all(np.diff(angles) < 0):
        raise ExtrapolationUnstable("need a decreasing approach sequence of angles")
    ratios = angles[1:] / angles[:-1]
    if np.any(ratios > 0.95):
        raise ExtrapolationUnstable("approach sequence is not geometric")

    taus = np.array([first_return(H, spec, (s0, u), config, chart=chart).tau for u in angles])
    coeffs = np.polynomial.polynomial.polyfit(angles, taus, poly_degree)
    fit = np.polynomial.polynomial.polyval(angles, coeffs)
    residual = float(np.max(np.abs(fit - taus)))
    if residual > residual_tol:
        raise ExtrapolationUnstable(f"polynomial residual {residual:.3e} > {residual_tol:.1e}")
    tau_polyfit = float(coeffs[0])

    # Route (b): the transverse coordinate x(tau; u), divided by the launch
    # angle u, extends through u = 0; the boundary return time is the zero in
    # tau of that quotient at u = 0.  Dense orbits are integrated lazily per
    # requested angle and cached, so the quotient's Taylor nodes are cheap.
    t_hi = float(np.max(taus)) + 1.0
    sols: dict[float, object] = {}

    def transverse(tau: float, u: float) -> float:
        u = float(u)
        if u not in sols:
            y0 = chart.point_to_state(s0, u)
            sols[u] = _solve_dense(H, y0, (0.0, t_hi), config, where="boundary extension").sol
        return float(chart.coordinate(sols[u](tau)))

    quotient = smooth_divide(
        transverse,
        order=1,
        t_switch=float(angles[-1]) / 2.0,
        t_fit=float(angles[0]),
    )

    def g_at_zero(tau: float) -> float:
        return quotient(float(tau), 0.0)

    # first upward zero of G(., 0) near the observed return times
    lo = max(float(np.min(taus)) - 0.5, 0.1)
    hi = min(float(np.max(taus)) + 0.5, t_hi)
    grid = np.linspace(lo, hi, 101)
    gvals = np.array([g_at_zero(t) for t in grid])
    tau_boundary = math.nan
    for i in range(len(grid) - 1):
        if gvals[i] < 0.0 <= gvals[i + 1]:
            tau_boundary = brentq(g_at_zero, float(grid[i]), float(grid[i + 1]), xtol=1e-12)
            break
    if math.isnan(tau_boundary):
        raise ExtrapolationUnstable("no sign change of the divided coordinate at u = 0")
    return BoundaryExtensionReport(
        angles=angles,
        taus=taus,
        tau_boundary=tau_boundary,
        tau_polyfit=tau_polyfit,
        residual=residual,
        branch_gap=abs(tau_boundary - tau_polyfit),
    )

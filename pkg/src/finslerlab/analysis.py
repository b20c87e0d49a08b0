"""Dynamical estimators over flows, traces and return maps.

All estimators are pure over precomputed inputs (orbit segments, lifted
traces, state samples); orbit production lives in :mod:`finslerlab.flow` and
:mod:`finslerlab.sections`.  Statistics that use uniform chart sampling are
coverage diagnostics, not invariant-measure statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import EmptySample, InsufficientCloud, MapFailure, NotConverged
from .flow import TWO_PI, ENSEMBLE_CONFIG, IntegratorConfig, OrbitTrace, integrate_ensemble, metric_x2_period, phase_space_distance
from .metrics import DualMetric
from .profiles import RotationalProfile

__all__ = [
    "RotationEstimate",
    "rotation_number",
    "rotation_number_from_displacements",
    "DirectionEstimate",
    "asymptotic_direction",
    "DeviationReport",
    "bounded_deviation",
    "EntropyEstimate",
    "entropy_separated_sets",
    "greedy_separated_set",
    "exact_separated_cardinality",
    "wrapped_metric",
    "GraphReport",
    "invariant_graph_test",
    "TubeSpec",
    "WitnessBall",
    "TubeReport",
    "tube_diagnostics",
    "turning_point_bisect",
]


# --- rotation numbers ---------------------------------------------------------


@dataclass(frozen=True)
class RotationEstimate:
    """Birkhoff average of lift displacements with a crude error bar."""

    value: float
    n: int
    error_bound: float

    @property
    def reduction(self) -> float:
        return self.value % 1.0


def rotation_number_from_displacements(displacements) -> RotationEstimate:
    d = np.asarray(displacements, dtype=float)
    n = len(d)
    if n == 0:
        raise EmptySample("no displacements")
    value = float(np.sum(d) / n)
    partial = np.concatenate([[0.0], np.cumsum(d)])
    excess = partial - value * np.arange(n + 1)
    return RotationEstimate(
        value=value, n=n, error_bound=float((np.max(excess) - np.min(excess)) / n)
    )


def rotation_number(map_fn, x0, n: int) -> RotationEstimate:
    """Average lift displacement of n iterates of a lifted annulus/circle map.

    ``map_fn(point) -> (image_point, lift_displacement)``; displacements are
    measured in full turns, so the reduction of the value mod 1 is the
    rotation number on the circle.
    """
    if n < 10:
        raise ValueError("need n >= 10 iterates")
    displacements = np.empty(n)
    x = x0
    for i in range(n):
        try:
            x, d = map_fn(x)
        except Exception as err:  # noqa: BLE001 - reported with iterate index
            raise MapFailure(i, err) from err
        displacements[i] = d
    return rotation_number_from_displacements(displacements)


# --- asymptotic direction and deviation ---------------------------------------


@dataclass(frozen=True)
class DirectionEstimate:
    direction: np.ndarray
    residual: float
    chord_lengths: np.ndarray


def _lift_and_times(trace_or_path, times=None):
    if isinstance(trace_or_path, OrbitTrace):
        return trace_or_path.lifted_base, trace_or_path.times
    path = np.asarray(trace_or_path, dtype=float)
    if times is None:
        times = np.arange(len(path), dtype=float)
    return path, np.asarray(times, dtype=float)


def asymptotic_direction(
    trace_or_path,
    times=None,
    *,
    residual_tol: float | None = 1e-2,
    n_windows: int = 3,
) -> DirectionEstimate:
    """Unit chord direction of the lifted path, with a dyadic-window residual.

    The residual is the largest pairwise angle between the chords measured at
    the final time T and at T/2, T/4, ...; it raises NotConverged when it
    exceeds ``residual_tol`` (pass None to only report).
    """
    path, ts = _lift_and_times(trace_or_path, times)
    T = ts[-1] - ts[0]
    dirs = []
    lengths = []
    for j in range(n_windows):
        t_j = ts[0] + T / 2.0**j
        idx = int(np.searchsorted(ts, t_j))
        idx = min(idx, len(ts) - 1)
        chord = path[idx] - path[0]
        norm = float(np.hypot(chord[0], chord[1]))
        if norm == 0.0:
            raise NotConverged("zero chord length; trace too short")
        dirs.append(chord / norm)
        lengths.append(norm)
    angles = [math.atan2(d[1], d[0]) for d in dirs]
    residual = max(
        abs((a - b + math.pi) % TWO_PI - math.pi) for a in angles for b in angles
    )
    if residual_tol is not None and residual > residual_tol:
        raise NotConverged(f"direction residual {residual:.3e} > {residual_tol:.1e}")
    return DirectionEstimate(
        direction=dirs[0], residual=float(residual), chord_lengths=np.array(lengths)
    )


@dataclass(frozen=True)
class DeviationReport:
    sup_distance: float
    argmax_index: int


def bounded_deviation(trace_or_path, rho, times=None) -> DeviationReport:
    """Sup distance of the lifted path to the line through its start along rho."""
    path, _ = _lift_and_times(trace_or_path, times)
    rho = np.asarray(rho, dtype=float)
    rho = rho / np.hypot(rho[0], rho[1])
    rel = path - path[0]
    dist = np.abs(rel[:, 0] * rho[1] - rel[:, 1] * rho[0])
    idx = int(np.argmax(dist))
    return DeviationReport(sup_distance=float(dist[idx]), argmax_index=idx)


# --- separated-set entropy -----------------------------------------------------


def wrapped_metric(periods):
    """Euclidean metric with selected coordinates wrapped on circles.

    ``periods[j]`` is the period of coordinate j or None for a linear
    coordinate.  Returns a vectorized ``d(a, b)`` over arrays (..., d).
    """
    periods = tuple(periods)

    def metric(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        total = 0.0
        for j, p in enumerate(periods):
            d = a[..., j] - b[..., j]
            if p is not None:
                d = (d + p / 2.0) % p - p / 2.0
            total = total + d * d
        return np.sqrt(total)

    return metric


def pairwise_orbit_distance(segments, T: int, metric) -> np.ndarray:
    """(N, N) matrix of d_T(i, j) = max over t <= T of d(orbit_i(t), orbit_j(t))."""
    segments = np.asarray(segments, dtype=float)
    n = segments.shape[0]
    dmat = np.zeros((n, n))
    for t in range(T + 1):
        pts = segments[:, t, :]
        np.maximum(dmat, metric(pts[:, None, :], pts[None, :, :]), out=dmat)
    return dmat


def _farthest_first_set(dmat: np.ndarray, eps: float, seed=()) -> np.ndarray:
    """Maximal eps-separated subset by deterministic farthest-first traversal.

    Starts from the seed (assumed separated), always adds the point farthest
    from the current set, and stops when every remaining point is within eps;
    the result is maximal against the whole cloud.
    """
    n = dmat.shape[0]
    selected = list(seed)
    if not selected:
        selected = [0]
    mind = np.full(n, np.inf)
    for i in selected:
        np.minimum(mind, dmat[i], out=mind)
        mind[i] = -np.inf
    while True:
        i = int(np.argmax(mind))
        if mind[i] <= eps:
            break
        selected.append(i)
        np.minimum(mind, dmat[i], out=mind)
        mind[i] = -np.inf
    return np.array(selected, dtype=int)


def greedy_separated_set(segments, T: int, eps: float, metric, seed=()) -> np.ndarray:
    """Maximal (T, eps)-separated subset of an orbit-segment cloud.

    ``segments`` has shape (N, M, d) with the orbit of point i sampled at
    iterate times 0..M-1; two points are separated when some t <= T has
    d(orbit_i(t), orbit_j(t)) > eps.  A seed of already-separated indices is
    kept and extended, which makes sets nested along increasing T.
    """
    return _farthest_first_set(pairwise_orbit_distance(segments, T, metric), eps, seed)


def exact_separated_cardinality(segments, T: int, eps: float, metric) -> int:
    """Exact maximal (T, eps)-separated cardinality by subset enumeration.

    Brute force for cross-checking greedy counts; only feasible for tiny
    clouds (N <= 20).
    """
    segments = np.asarray(segments, dtype=float)
    n = segments.shape[0]
    if n > 20:
        raise ValueError("exact enumeration limited to N <= 20")
    window = segments[:, : T + 1, :]
    close = np.zeros(n, dtype=int)  # bitmask of eps-close (non-separated) pairs
    for i in range(n):
        d = metric(window[i][None, :, :], window)
        near = np.max(d, axis=-1) <= eps
        mask = 0
        for j in range(n):
            if j != i and near[j]:
                mask |= 1 << j
        close[i] = mask
    best = 0
    for subset in range(1 << n):
        if subset.bit_count() <= best:
            continue
        ok = True
        rest = subset
        while rest:
            i = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            if close[i] & subset:
                ok = False
                break
        if ok:
            best = subset.bit_count()
    return best


@dataclass
class EntropyEstimate:
    """Separated-set growth table and its per-scale exponential rates."""

    table: list[tuple[int, float, int]]  # (T, eps, s)
    slopes: dict[float, float]
    residuals: dict[float, float]
    value: float
    value_eps: float
    sets: dict[tuple[int, float], np.ndarray] = field(default_factory=dict, repr=False)

    def s_of(self, T: int, eps: float) -> int:
        for row in self.table:
            if row[0] == T and row[1] == eps:
                return row[2]
        raise KeyError((T, eps))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("T,eps,s,slope\n")
            for T, eps, s in self.table:
                fh.write(f"{T!r},{eps!r},{s!r},{self.slopes[eps]!r}\n")


def entropy_separated_sets(
    segments,
    T_list,
    eps_list,
    metric,
    *,
    saturation_fraction: float = 0.4,
    stability_tol: float = 0.1,
    insufficient_fraction: float = 0.9,
) -> EntropyEstimate:
    """Greedy separated-set entropy estimate from precomputed orbit segments.

    For each scale eps the greedy sets are grown along increasing T (nested,
    so s is nondecreasing in T); across scales the reported counts take the
    running maximum over coarser eps, which keeps every count a valid
    separated-set cardinality and enforces monotonicity in eps.  The estimate
    is the log-count slope over the non-saturated T window, taken at the
    smallest eps whose linear fit is stable.
    """
    segments = np.asarray(segments, dtype=float)
    n = segments.shape[0]
    if n == 0:
        raise EmptySample("empty point cloud")
    T_list = sorted(int(t) for t in T_list)
    eps_desc = sorted((float(e) for e in eps_list), reverse=True)
    if segments.shape[1] < T_list[-1] + 1:
        raise ValueError("segments shorter than max requested T")

    sets: dict[tuple[int, float], np.ndarray] = {}
    counts: dict[tuple[int, float], int] = {}
    seeds: dict[float, tuple] = {eps: () for eps in eps_desc}
    dmat = np.zeros((n, n))
    t_done = -1
    for T in T_list:
        for t in range(t_done + 1, T + 1):
            pts = segments[:, t, :]
            np.maximum(dmat, metric(pts[:, None, :], pts[None, :, :]), out=dmat)
        t_done = T
        for eps in eps_desc:
            sel = _farthest_first_set(dmat, eps, seeds[eps])
            sets[(T, eps)] = sel
            counts[(T, eps)] = len(sel)
            seeds[eps] = tuple(sel)
    if counts[(T_list[0], eps_desc[-1])] >= insufficient_fraction * n:
        raise InsufficientCloud(
            f"cloud of {n} saturates already at T={T_list[0]}, eps={eps_desc[-1]}"
        )
    # monotone envelope across scales: a set separated at coarser eps is
    # separated at finer eps as well
    for T in T_list:
        running = 0
        for eps in eps_desc:
            running = max(running, counts[(T, eps)])
            counts[(T, eps)] = running

    table = [(T, eps, counts[(T, eps)]) for T in T_list for eps in eps_desc]
    slopes: dict[float, float] = {}
    residuals: dict[float, float] = {}
    for eps in eps_desc:
        ts = np.array(T_list, dtype=float)
        ss = np.array([counts[(T, eps)] for T in T_list], dtype=float)
        keep = ss <= saturation_fraction * n
        if np.count_nonzero(keep) < 3:
            keep = np.ones_like(keep, dtype=bool)
        x, y = ts[keep], np.log(ss[keep])
        coef = np.polynomial.polynomial.polyfit(x, y, 1)
        fit = np.polynomial.polynomial.polyval(x, coef)
        slopes[eps] = float(coef[1])
        residuals[eps] = float(np.sqrt(np.mean((fit - y) ** 2)))

    value = math.nan
    value_eps = math.nan
    for eps in sorted(eps_desc):  # ascending: smallest eps first
        if residuals[eps] <= stability_tol:
            value, value_eps = slopes[eps], eps
            break
    if math.isnan(value):
        value_eps = min(residuals, key=residuals.get)
        value = slopes[value_eps]
    return EntropyEstimate(
        table=table,
        slopes=slopes,
        residuals=residuals,
        value=value,
        value_eps=value_eps,
        sets=sets,
    )


# --- invariant graphs ----------------------------------------------------------


@dataclass(frozen=True)
class GraphReport:
    is_graph: bool
    max_fiber_gap: float
    lipschitz_estimate: float
    deviation_d: float
    bins: tuple[int, int]
    occupied_fraction: float


def _circular_diameter(angles: np.ndarray) -> float:
    if len(angles) <= 1:
        return 0.0
    a = np.sort(angles % TWO_PI)
    gaps = np.diff(a, append=a[0] + TWO_PI)
    return float(TWO_PI - np.max(gaps))


def invariant_graph_test(
    states,
    x2_period: float,
    *,
    bins: tuple[int, int] = (32, 32),
    fiber_tol: float = 0.35,
    representative: tuple | None = None,
) -> GraphReport:
    """Check whether a state sample is a graph over the torus base.

    Samples are binned by base point; the fiber value is the covector angle.
    The sample passes when every occupied bin's fiber values cluster within
    ``fiber_tol`` (circular diameter).  The Lipschitz estimate is the largest
    mean-angle difference between neighboring occupied bins divided by the
    base distance of their centers.  ``representative`` is an optional
    (lifted_path, direction) pair whose bounded deviation is reported as
    deviation_d.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.size == 0:
        raise EmptySample("no states to bin")
    n1, n2 = bins
    b1 = np.floor((states[:, 0] % TWO_PI) / TWO_PI * n1).astype(int) % n1
    b2 = np.floor((states[:, 1] % x2_period) / x2_period * n2).astype(int) % n2
    theta = np.arctan2(states[:, 3], states[:, 2])

    flat = b1 * n2 + b2
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    theta_sorted = theta[order]
    boundaries = np.searchsorted(flat_sorted, np.arange(n1 * n2 + 1))

    max_gap = 0.0
    mean_angle = np.full(n1 * n2, np.nan)
    occupied = 0
    for cell in range(n1 * n2):
        lo, hi = boundaries[cell], boundaries[cell + 1]
        if hi <= lo:
            continue
        occupied += 1
        cell_angles = theta_sorted[lo:hi]
        max_gap = max(max_gap, _circular_diameter(cell_angles))
        mean_angle[cell] = math.atan2(
            float(np.mean(np.sin(cell_angles))), float(np.mean(np.cos(cell_angles)))
        )

    cell_w1 = TWO_PI / n1
    cell_w2 = x2_period / n2
    lip = 0.0
    grid = mean_angle.reshape(n1, n2)
    for axis, width in ((0, cell_w1), (1, cell_w2)):
        rolled = np.roll(grid, -1, axis=axis)
        diff = np.abs((grid - rolled + math.pi) % TWO_PI - math.pi)
        valid = ~np.isnan(diff)
        if np.any(valid):
            lip = max(lip, float(np.nanmax(diff[valid])) / width)

    dev = math.nan
    if representative is not None:
        path, rho = representative
        dev = bounded_deviation(path, rho).sup_distance
    return GraphReport(
        is_graph=bool(max_gap <= fiber_tol),
        max_fiber_gap=float(max_gap),
        lipschitz_estimate=float(lip),
        deviation_d=dev,
        bins=(n1, n2),
        occupied_fraction=occupied / (n1 * n2),
    )


# --- elliptic tube diagnostics ---------------------------------------------------


@dataclass(frozen=True)
class TubeSpec:
    """Tube {c_lo < xi1 < c_hi} on the unit level, boundary coded by the levels."""

    c_lo: float
    c_hi: float

    def gap(self, xi1) -> np.ndarray:
        xi1 = np.asarray(xi1, dtype=float)
        return np.minimum(xi1 - self.c_lo, self.c_hi - xi1)


@dataclass(frozen=True)
class WitnessBall:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class TubeReport:
    eps_grid: np.ndarray
    boundary_fraction: np.ndarray
    min_boundary_dists: np.ndarray  # per ensemble orbit
    initial_gaps: np.ndarray
    witness_distances: list[tuple[np.ndarray, float, float]]
    n_failed: int


def tube_diagnostics(
    H: DualMetric,
    tube: TubeSpec,
    states,
    eps_grid,
    witness_balls: list[WitnessBall],
    *,
    ensemble_time: float = 30.0,
    long_time: float = 1000.0,
    config: IntegratorConfig = ENSEMBLE_CONFIG,
) -> TubeReport:
    """Conservation-forced structure of a tube: boundary distances and holes.

    Each ensemble orbit's minimal xi1-distance to the tube boundary levels is
    tracked along its run (xi1 is conserved, so the distance essentially
    equals the initial gap); boundary_fraction(eps) is the fraction of orbits
    that come within eps of the boundary.  One long orbit is run against the
    witness balls: a ball whose xi1-range avoids the orbit's conserved level
    must keep a positive distance, the numerical shadow of non-density.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.size == 0:
        raise EmptySample("empty tube ensemble")
    eps_grid = np.asarray(sorted(float(e) for e in eps_grid))
    x2_period = metric_x2_period(H)

    n_failed = 0
    try:
        ens = integrate_ensemble(H, states, ensemble_time, config)
        xi1_paths = ens.states[:, :, 2]  # (m, N)
        min_dists = np.min(tube.gap(xi1_paths), axis=0)
    except Exception:  # batch integration failed; fall back orbit by orbit
        from .flow import integrate_orbit

        dists = []
        for y0 in states:
            try:
                tr = integrate_orbit(H, y0, ensemble_time, config, enforce_drift=False)
                dists.append(float(np.min(tube.gap(tr.h1_values))))
            except Exception:
                n_failed += 1
        min_dists = np.array(dists)

    fractions = np.array([float(np.mean(min_dists < eps)) for eps in eps_grid])
    gaps = tube.gap(states[:, 2])

    witness_distances: list[tuple[np.ndarray, float, float]] = []
    if witness_balls:
        long_trace = integrate_ensemble(H, states[:1], long_time, config)
        orbit = long_trace.states[:, 0, :]
        for ball in witness_balls:
            d = phase_space_distance(orbit, ball.center, x2_period) - ball.radius
            witness_distances.append((np.asarray(ball.center, dtype=float), ball.radius, float(np.min(d))))

    return TubeReport(
        eps_grid=eps_grid,
        boundary_fraction=fractions,
        min_boundary_dists=min_dists,
        initial_gaps=gaps,
        witness_distances=witness_distances,
        n_failed=n_failed,
    )


# --- Clairaut turning point -------------------------------------------------------


def turning_point_bisect(profile: RotationalProfile, c: float, x_hi: float = 40.0) -> float:
    """Height x* > 0 where f(x*) = c, bounding trapped-orbit oscillation.

    Bisection on the decreasing side of the profile peak; requires
    f(0) > c > f(x_hi).
    """
    f = profile.f
    if not (float(f(0.0)) > c > float(f(x_hi))):
        raise ValueError(f"no turning point: need f(0) > {c!r} > f({x_hi!r})")
    return float(brentq(lambda x: float(f(x)) - c, 0.0, x_hi, xtol=1e-14))

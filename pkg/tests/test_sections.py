import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from finslerlab.errors import (
    BranchMismatch,
    ExtrapolationUnstable,
    NoCrossing,
    NonTransverse,
    NotVanishing,
)
from finslerlab.flow import TWO_PI, integrate_orbit, phase_space_distance
from finslerlab.metrics import ALPHA_GOLDEN
from finslerlab.sections import (
    AnnulusChart,
    SectionSpec,
    build_return_map_grid,
    detect_crossing,
    ensemble_return_step,
    first_return,
    iterate_section_map,
    return_time_boundary_extension,
    smooth_divide,
)

SPHERE_SPEC = SectionSpec(kind="equator_birkhoff", max_return_time=8.0)


class TestChart:
    def test_round_trip_equator(self, katok_sphere):
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        for s, u in [(0.3, 0.4), (5.9, 2.8), (2.0, math.pi / 2)]:
            y = chart.point_to_state(s, u)
            assert float(katok_sphere.value(y)) == pytest.approx(1.0, abs=1e-14)
            s2, u2 = chart.state_to_point(y)
            assert s2 == pytest.approx(s, abs=1e-12)
            assert u2 == pytest.approx(u, abs=1e-12)

    def test_round_trip_meridian(self, katok_torus_reversible):
        spec = SectionSpec(kind="meridian", x1_star=0.0, max_return_time=40.0)
        chart = AnnulusChart(katok_torus_reversible, spec)
        assert 2.5 < chart.circumference < 2.7  # meridian length of the splice
        for s, u in [(0.5, 0.3), (2.0, 1.2), (2.4, 2.6)]:
            y = chart.point_to_state(s, u)
            assert float(katok_torus_reversible.value(y)) == pytest.approx(1.0, abs=1e-14)
            s2, u2 = chart.state_to_point(y)
            assert s2 == pytest.approx(s, abs=1e-9)
            assert u2 == pytest.approx(u, abs=1e-9)

    def test_meridian_circumference_is_profile_length(self, h0_torus, spliced_profile):
        spec = SectionSpec(kind="meridian", max_return_time=40.0)
        chart = AnnulusChart(h0_torus, spec)
        grid = np.linspace(0.0, 4.0, 100_001)
        length = float(np.trapezoid(spliced_profile.f(grid), grid))
        assert chart.circumference == pytest.approx(length, rel=1e-8)

    def test_points_of_states_matches_scalar(self, katok_sphere, rng):
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        pts = np.stack([rng.uniform(0, TWO_PI, 20), rng.uniform(0.2, math.pi - 0.2, 20)], axis=1)
        states = np.array([chart.point_to_state(s, u) for s, u in pts])
        batch = chart.points_of_states(states)
        singles = np.array([chart.state_to_point(y) for y in states])
        assert np.max(np.abs(batch - singles)) <= 1e-12


class TestDetectCrossing:
    def test_upcrossing_against_local_bisection_oracle(self, h0_sphere, tight_config):
        # launch from below the equator heading north-east
        y0 = np.array([0.0, -0.5, 0.3, float(np.sqrt(h0_sphere.profile.f(-0.5) ** 2 - 0.09))])
        event = detect_crossing(h0_sphere, y0, SPHERE_SPEC, tight_config)
        assert abs(event.state[1]) <= 1e-10
        # independent oracle: raw solve_ivp dense output + bisection in this test
        sol = solve_ivp(
            h0_sphere.scalar_rhs(), (0.0, 3.0), y0, method="DOP853",
            rtol=1e-12, atol=1e-12, dense_output=True,
        )
        t_oracle = brentq(lambda t: sol.sol(t)[1], 0.1, 3.0, xtol=1e-13)
        assert event.time == pytest.approx(t_oracle, abs=1e-9)

    def test_boundary_orbit_is_non_transverse(self, h0_sphere, tight_config):
        with pytest.raises(NonTransverse):
            first_return(h0_sphere, SPHERE_SPEC, (1.0, 0.0), tight_config)

    def test_no_crossing_reported(self, h0_torus, tight_config):
        # xi1 = 0 orbit never crosses a meridian section transversally
        spec = SectionSpec(kind="meridian", max_return_time=10.0)
        y0 = np.array([1.0, 0.3, 0.0, float(h0_torus.profile.f(0.3))])
        with pytest.raises(NoCrossing):
            detect_crossing(h0_torus, y0, spec, tight_config)

    def test_torus_parallel_section_crossing_within_quadrature_bound(
        self, h0_torus, spliced_profile, tight_config
    ):
        # vertical rotating orbit hits {x2 = 0} once per x2-period

        spec = SectionSpec(kind="equator_birkhoff", x2_star=0.0, max_return_time=30.0)
        y0 = np.array([1.0, 0.0, 0.0, 1.0])
        event = detect_crossing(h0_torus, y0, spec, tight_config, t_skip=0.1)
        # reduced period quadrature: dt = f dx2 when xi1 = 0, so the return
        # time is the meridian length, one x2-period climb
        grid = np.linspace(0.0, 4.0, 400_001)
        f = np.asarray(spliced_profile.f(grid))
        period = float(np.trapezoid(f, grid))
        assert event.time == pytest.approx(period, abs=1e-6)
        assert event.time <= spec.max_return_time


class TestFirstReturn:
    def test_round_sphere_identity_at_many_points(self, h0_sphere, tight_config, rng):
        chart = AnnulusChart(h0_sphere, SPHERE_SPEC)
        for _ in range(20):
            s = float(rng.uniform(0.0, TWO_PI))
            u = float(rng.uniform(0.25, math.pi - 0.25))
            sample = first_return(h0_sphere, SPHERE_SPEC, (s, u), tight_config, chart=chart)
            assert abs(circdiff(sample.image[0] - s)) <= 1e-6
            assert abs(sample.image[1] - u) <= 1e-6
            assert sample.tau == pytest.approx(TWO_PI, abs=1e-6)

    def test_quarter_angle_point(self, h0_sphere, tight_config):
        sample = first_return(h0_sphere, SPHERE_SPEC, (1.0, math.pi / 4), tight_config)
        assert abs(circdiff(sample.image[0] - 1.0)) <= 1e-6
        assert sample.image[1] == pytest.approx(math.pi / 4, abs=1e-6)

    def test_cone_point_shift_matches_composed_flow(
        self, sphere_profile, cutoffs, katok_sphere, tight_config
    ):
        from finslerlab.flow import compose_commuting_flows

        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        s0, u0 = 1.0, 0.25  # ratio cos(0.25) = 0.969 >= f0(a0) = 0.957
        y0 = chart.point_to_state(s0, u0)
        sample = first_return(katok_sphere, SPHERE_SPEC, (s0, u0), tight_config, chart=chart)
        composed = compose_commuting_flows(
            sphere_profile, ALPHA_GOLDEN, y0, sample.tau, cone_a=cutoffs.a0, config=tight_config
        )
        s_pred, u_pred = chart.state_to_point(composed.array)
        assert abs(circdiff(sample.image[0] - s_pred)) <= 1e-6
        assert abs(sample.image[1] - u_pred) <= 1e-6
        # the twist: angle preserved, s advanced by 2 pi alpha
        assert abs(circdiff(sample.image[0] - s0 - TWO_PI * ALPHA_GOLDEN)) <= 1e-6

    def test_reconstruction_invariant(self, katok_sphere, tight_config):
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        sample = first_return(katok_sphere, SPHERE_SPEC, (2.0, 0.8), tight_config, chart=chart)
        y0 = chart.point_to_state(*sample.point)
        trace = integrate_orbit(katok_sphere, y0, sample.tau, tight_config)
        y_img = chart.point_to_state(*sample.image)
        assert phase_space_distance(trace.final_state, y_img) <= 1e-7


class TestReturnMapGrid:
    def test_identity_grid(self, h0_sphere, tight_config):
        table = build_return_map_grid(
            h0_sphere, SPHERE_SPEC, np.linspace(0.5, 5.5, 4), np.linspace(0.4, math.pi - 0.4, 4),
            tight_config,
        )
        ok = table.ok_records()
        assert len(ok) == 16
        assert max(abs(r.tau - TWO_PI) for r in ok) <= 1e-6

    def test_boundary_rows_fail_nontransversally(self, h0_sphere, tight_config):
        table = build_return_map_grid(
            h0_sphere, SPHERE_SPEC, [1.0, 2.0], [0.0, math.pi], tight_config
        )
        assert all(r.status == "NonTransverse" for r in table.records)

    def test_mixed_torus_grid_statuses(self, katok_torus_reversible, tight_config):
        spec = SectionSpec(kind="meridian", max_return_time=60.0)
        # u = pi/2 launches along +e1 (deep trapped, fast return); u = 0.15 is
        # a slow rotating orbit that still returns; u = 0.01 is so close to
        # vertical that its return exceeds the time bound
        table = build_return_map_grid(
            katok_torus_reversible, spec, [1.0], [0.01, 0.15, 0.6, math.pi / 2], tight_config
        )
        by_u = {round(r.u, 3): r for r in table.records}
        assert by_u[0.01].status == "NoCrossing"
        assert by_u[0.15].status == "ok" and by_u[0.15].tau > 20.0
        assert by_u[0.6].status == "ok"
        assert by_u[round(math.pi / 2, 3)].status == "ok"
        assert by_u[round(math.pi / 2, 3)].tau == pytest.approx(TWO_PI, abs=1e-3)

    def test_trapped_state_with_opposite_drift_never_crosses(
        self, katok_torus_reversible, tight_config
    ):
        # xi1 < 0 states drift along -e1: they are outside this annulus's
        # admissible half-circle and never cross with positive normal speed
        spec = SectionSpec(kind="meridian", max_return_time=40.0)
        y0 = np.array([1.0, 0.0, -0.6, 0.8])
        with pytest.raises(NoCrossing):
            detect_crossing(katok_torus_reversible, y0, spec, tight_config)

    def test_csv_schema(self, h0_sphere, tight_config, tmp_path):
        table = build_return_map_grid(h0_sphere, SPHERE_SPEC, [1.0], [0.5], tight_config)
        path = tmp_path / "grid.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "s,u,s_image,u_image,tau,lift_ds,status"
        assert len(lines) == 2


class TestIterateSectionMap:
    def test_matches_single_returns(self, katok_sphere, tight_config):
        orbit = iterate_section_map(katok_sphere, SPHERE_SPEC, (0.7, 0.9), 5, tight_config)
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        point = (0.7, 0.9)
        for k in range(1, 6):
            sample = first_return(katok_sphere, SPHERE_SPEC, point, tight_config, chart=chart)
            assert abs(circdiff(orbit.points[k][0] - sample.image[0])) <= 1e-7
            assert abs(orbit.points[k][1] - sample.image[1]) <= 1e-7
            point = sample.image

    def test_ensemble_step_agrees_with_tight_returns(self, katok_sphere, fast_config, tight_config):
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        pts = [(0.3, 0.5), (2.0, 1.2), (4.0, 2.2)]
        states = np.array([chart.point_to_state(s, u) for s, u in pts])
        new_states, taus, ok = ensemble_return_step(katok_sphere, SPHERE_SPEC, states, fast_config, chart=chart)
        assert ok.all()
        for i, (s, u) in enumerate(pts):
            sample = first_return(katok_sphere, SPHERE_SPEC, (s, u), tight_config, chart=chart)
            assert taus[i] == pytest.approx(sample.tau, abs=1e-6)
            got = chart.state_to_point(new_states[i])
            assert abs(circdiff(got[0] - sample.image[0])) <= 1e-5
            assert abs(got[1] - sample.image[1]) <= 1e-5


class TestAreaPreservation:
    def test_flux_area_of_quadrilateral(self, katok_sphere, tight_config):
        # the return map preserves the section restriction of the canonical
        # area, which in (x1-lift, xi1) coordinates is the euclidean area
        chart = AnnulusChart(katok_sphere, SPHERE_SPEC)
        s0, u0, d = 0.8, 0.45, 0.02
        corners = [(s0 - d, u0 - d), (s0 + d, u0 - d), (s0 + d, u0 + d), (s0 - d, u0 + d)]
        before, after = [], []
        for corner in corners:
            y = chart.point_to_state(*corner)
            before.append(chart.symplectic_coords(y))
            sample = first_return(katok_sphere, SPHERE_SPEC, corner, tight_config, chart=chart)
            y_img = chart.point_to_state(*sample.image)
            after.append((y[0] + sample.lift_displacement * TWO_PI, y_img[2]))
        assert shoelace(after) == pytest.approx(shoelace(before), rel=0.01)


class TestSmoothDivide:
    def test_linear_gives_one(self):
        q = smooth_divide(lambda x, t: t, order=2)
        assert q(0.0, 0.0) == pytest.approx(1.0, abs=1e-10)
        assert q(0.0, 0.4) == 1.0

    def test_sine_leading_coefficient(self):
        q = smooth_divide(lambda x, t: x * math.sin(t), order=2)
        for x in (-1.0, 0.5, 2.0):
            assert q(x, 0.0) == pytest.approx(x, abs=1e-9)

    def test_exponential_derivative_identity(self):
        q = smooth_divide(lambda x, t: t * math.exp(x * t), order=2)
        for x in (-1.0, 0.5, 2.0):
            # dG/dt(x, 0) = d2F/dt2(x, 0) / 2 = x
            assert q.dt_at_zero(x, 1) == pytest.approx(x, abs=1e-4)

    def test_second_derivative_identity(self):
        q = smooth_divide(lambda x, t: t * math.cos(x * t), order=2)
        for x in (-1.0, 0.5, 2.0):
            # d3F/dt3(x, 0)/3 = -x^2
            assert q.dt_at_zero(x, 2) == pytest.approx(-x * x, abs=1e-4)

    def test_not_vanishing_guard(self):
        q = smooth_divide(lambda x, t: 1.0 + t, order=1)
        with pytest.raises(NotVanishing):
            q(0.0, 0.0)

    def test_branch_agreement_at_switch(self):
        q = smooth_divide(lambda x, t: math.sin(1.7 * t) * math.exp(x * t), order=2)
        for x in (-0.5, 1.0):
            lo = q(x, q.t_switch * (1 - 1e-9))
            hi = q(x, q.t_switch * (1 + 1e-9))
            assert lo == pytest.approx(hi, abs=1e-8)

    def test_branch_mismatch_detected_for_nonsmooth_input(self):
        # |t| is not of the form t * smooth, so the Taylor model cannot match
        q = smooth_divide(lambda x, t: abs(t) * (1.0 + t * t), order=1)
        with pytest.raises(BranchMismatch):
            q(0.0, 0.0)

    def test_derivative_slot_guard(self):
        q = smooth_divide(lambda x, t: t, order=1)
        with pytest.raises(ValueError):
            q.dt_at_zero(0.0, 5)


class TestBoundaryExtension:
    def test_round_sphere_boundary_time_is_full_period(self, h0_sphere, tight_config):
        report = return_time_boundary_extension(h0_sphere, SPHERE_SPEC, tight_config)
        assert report.tau_boundary == pytest.approx(TWO_PI, abs=1e-5)
        assert report.tau_polyfit == pytest.approx(TWO_PI, abs=1e-5)
        assert report.residual <= 1e-4

    def test_perturbed_sphere_extension_is_finite_and_smooth(self, katok_sphere, tight_config):
        report = return_time_boundary_extension(katok_sphere, SPHERE_SPEC, tight_config)
        assert math.isfinite(report.tau_boundary)
        assert report.residual <= 1e-4
        assert report.branch_gap <= 1e-4

    def test_non_geometric_samples_rejected(self, h0_sphere, tight_config):
        with pytest.raises(ExtrapolationUnstable):
            return_time_boundary_extension(
                h0_sphere, SPHERE_SPEC, tight_config, angles=np.array([0.4, 0.39, 0.38, 0.37, 0.36, 0.35])
            )


def circdiff(d):
    return (d + math.pi) % TWO_PI - math.pi


def shoelace(points):
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

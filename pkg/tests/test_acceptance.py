"""Acceptance battery.

Each criterion is asserted at its stated tolerance and prints one pass/fail
line (run pytest with -s to see them).  Scenario bundles are executed once per
session and shared across criteria; the determinism criterion runs the CLI
entry point twice, exactly as a user would.
"""

import json
import math
import time

import pytest

from finslerlab.cli import main as cli_main
from finslerlab.metrics import ALPHA_GOLDEN
from finslerlab.scenarios import run_scenario

TWO_PI = 2.0 * math.pi


def _line(num: int, passed: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {'PASS' if passed else 'FAIL'}: {detail}")


@pytest.fixture(scope="module")
def rounds():
    return run_scenario("round-sphere-baseline", seed=0, write=False)


@pytest.fixture(scope="module")
def katok_sphere_report():
    return run_scenario("katok-sphere", seed=0, write=False)


@pytest.fixture(scope="module")
def katok_torus_report():
    return run_scenario("katok-torus", seed=0, write=False)


@pytest.fixture(scope="module")
def benchmark_report():
    return run_scenario("benchmark-maps", seed=0, write=False)


@pytest.fixture(scope="module")
def smooth_division_report():
    return run_scenario("appendix-smooth-division", seed=0, write=False)


def test_criterion_01_finsler_axioms(rounds, katok_sphere_report):
    """Homogeneity/Euler to 1e-10, positive fiber Hessian, for H0 and the
    perturbed family at alpha = 0.05 * golden; runtime < 5 s."""
    assert katok_sphere_report.config["metric"]["alpha"] == ALPHA_GOLDEN
    worst = {"homogeneity": 0.0, "euler": 0.0}
    min_eig = math.inf
    for rep in (rounds, katok_sphere_report):
        worst["homogeneity"] = max(worst["homogeneity"], rep.check("axioms.homogeneity").value)
        worst["euler"] = max(worst["euler"], rep.check("axioms.euler_identity").value)
        min_eig = min(min_eig, rep.check("axioms.hessian_min_eigenvalue").value)
        assert rep.check("axioms.homogeneity").passed
        assert rep.check("axioms.euler_identity").passed
        assert rep.check("axioms.hessian_min_eigenvalue").passed
    runtime = rounds.timings["axioms"] + katok_sphere_report.timings["axioms"]
    ok = worst["homogeneity"] <= 1e-10 and worst["euler"] <= 1e-10 and min_eig > 0 and runtime < 5.0
    _line(1, ok, f"homog {worst['homogeneity']:.1e}, euler {worst['euler']:.1e}, "
                 f"min eig {min_eig:.3f}, runtime {runtime:.2f}s")
    assert ok


def test_criterion_02_perturbation_locality(katok_sphere_report):
    """H_alpha = H0 exactly outside the outer cone; H0 + alpha*xi1 to 1e-14 inside."""
    outside = katok_sphere_report.check("locality.outside_inner_cone")
    inside = katok_sphere_report.check("locality.inner_cone_formula")
    ok = outside.value == 0.0 and inside.value <= 1e-14
    _line(2, ok, f"outside gap {outside.value!r}, inner-cone gap {inside.value:.2e}")
    assert ok


def test_criterion_03_periodic_flow(rounds):
    """Time-2pi flow of the round metric is the identity on 50 cone samples."""
    check = rounds.check("periodicity.max_distance")
    runtime = rounds.timings["periodicity"]
    ok = check.value <= 1e-6 and runtime < 30.0
    _line(3, ok, f"max return distance {check.value:.2e} over 50 samples, runtime {runtime:.2f}s")
    assert ok


def test_criterion_04_commuting_flows(katok_sphere_report):
    """Direct perturbed orbits match the composed-flow oracle within 1e-6."""
    check = katok_sphere_report.check("commuting.flow_identity")
    ok = check.value <= 1e-6
    _line(4, ok, f"max phase-space distance {check.value:.2e} over 10 cone samples")
    assert ok


def test_criterion_05_reversibilization(katok_sphere_report):
    """Symmetrized metric even to 1e-12; seam jets (orders <= 3) match to 1e-5."""
    even = katok_sphere_report.check("reversible.evenness")
    jets = katok_sphere_report.check("reversible.seam_jets")
    ok = even.value <= 1e-12 and jets.value <= 1e-5
    _line(5, ok, f"evenness {even.value:.2e}, seam jet gap {jets.value:.2e}")
    assert ok


def test_criterion_06_birkhoff_return_map(rounds):
    """Round-sphere return map is the identity with tau = 2pi on an 8x8 grid,
    and the boundary extension of tau lands on 2pi."""
    ident = rounds.check("return_grid.identity")
    tau = rounds.check("return_grid.tau")
    complete = rounds.check("return_grid.all_points_returned")
    boundary = rounds.check("boundary.tau_gap")
    ok = (
        ident.value <= 1e-6
        and tau.value <= 1e-6
        and complete.passed
        and boundary.value <= 1e-5
    )
    _line(6, ok, f"identity {ident.value:.2e}, tau gap {tau.value:.2e}, "
                 f"boundary tau gap {boundary.value:.2e}")
    assert ok


def test_criterion_07_smooth_division(smooth_division_report):
    """Divided-function derivative identity for k in {0,1,2} at 1e-4."""
    worst = 0.0
    for k in range(3):
        for name in (f"smooth_divide.exact_k{k}", f"smooth_divide.derivative_identity_k{k}"):
            check = smooth_division_report.check(name)
            worst = max(worst, check.value)
            assert check.passed, name
    ok = worst <= 1e-4
    _line(7, ok, f"worst derivative error {worst:.2e} over the analytic battery")
    assert ok


def test_criterion_08_conservation(rounds, katok_sphere_report, katok_torus_report):
    """H and xi1 drift at most 1e-8 relative over flow time 100 on scenario orbits."""
    worst = 0.0
    for rep in (rounds, katok_sphere_report, katok_torus_report):
        for name in ("conservation.h_drift", "conservation.xi1_drift"):
            check = rep.check(name)
            worst = max(worst, check.value)
            assert check.passed, (rep.scenario, name)
    ok = worst <= 1e-8
    _line(8, ok, f"worst relative drift {worst:.2e}")
    assert ok


def test_criterion_09_entropy_battery(benchmark_report, katok_sphere_report, katok_torus_report):
    """Identity/rotation <= 0.02; doubling within 15% of log 2; the hyperbolic
    torus automorphism within 10% of log((3+sqrt5)/2); both laboratory
    zero-entropy systems <= 0.05; entropy runtime < 5 min at 2e3 cloud points."""
    ident = benchmark_report.check("entropy.identity")
    rot = benchmark_report.check("entropy.rigid_rotation")
    dbl = benchmark_report.check("entropy.doubling")
    cat = benchmark_report.check("entropy.cat_map")
    kmap = katok_sphere_report.check("entropy.return_map")
    flow = katok_torus_report.check("entropy.integrable_flow")
    for check in (ident, rot, dbl, cat, kmap, flow):
        assert check.passed, check.name
    runtime = (
        sum(v for k, v in benchmark_report.timings.items() if k.startswith("entropy"))
        + katok_sphere_report.timings["entropy"]
        + katok_torus_report.timings["entropy"]
    )
    rel_dbl = abs(dbl.value / math.log(2.0) - 1.0)
    rel_cat = abs(cat.value / math.log((3.0 + math.sqrt(5.0)) / 2.0) - 1.0)
    ok = (
        abs(ident.value) <= 0.02
        and abs(rot.value) <= 0.02
        and rel_dbl <= 0.15
        and rel_cat <= 0.10
        and kmap.value <= 0.05
        and flow.value <= 0.05
        and runtime < 300.0
    )
    _line(9, ok, f"identity {ident.value:.1e}, doubling rel {rel_dbl:.3f}, cat rel {rel_cat:.3f}, "
                 f"return map {kmap.value:.3f}, flow {flow.value:.3f}, runtime {runtime:.0f}s")
    assert ok


def test_criterion_10_invariant_graphs(katok_torus_report):
    """Level-set graphs stable across bin resolutions; rotating deviation
    stabilizes within 5%; trapped orbits confined by the turning point."""
    level = katok_torus_report.check("graphs.level_set_stable")
    orbit = katok_torus_report.check("graphs.rotating_orbit")
    two = katok_torus_report.check("graphs.two_branch_rejected")
    dev = katok_torus_report.check("deviation.rotating_stable")
    trap = katok_torus_report.check("trapped.sup_x2_bound")
    ok = level.passed and orbit.passed and two.passed and dev.value <= 0.05 and trap.passed
    _line(10, ok, f"graph verdicts stable, deviation change {dev.value:.3f}, "
                  f"sup|x2| {trap.value:.6f} <= {trap.tolerance:.6f}")
    assert ok


def test_criterion_11_tube_diagnostics(katok_torus_report):
    """Conservation gap bounds boundary distance; at least 5 positive witness
    holes after flow time 1e3; boundary fraction monotone on the eps grid."""
    gap = katok_torus_report.check("tube.gap_bound")
    witnesses = katok_torus_report.check("tube.witness_holes")
    mono = katok_torus_report.check("tube.fraction_monotone")
    ok = gap.value <= 1e-6 and witnesses.value >= 5 and mono.passed
    _line(11, ok, f"worst gap violation {gap.value:.2e}, positive witnesses {int(witnesses.value)}")
    assert ok


def test_criterion_12_determinism(tmp_path_factory):
    """Two CLI runs of `run katok-torus --seed 7` emit byte-identical reports."""
    out_a = tmp_path_factory.mktemp("det_a")
    out_b = tmp_path_factory.mktemp("det_b")
    rc_a = cli_main(["run", "katok-torus", "--seed", "7", "--out", str(out_a)])
    rc_b = cli_main(["run", "katok-torus", "--seed", "7", "--out", str(out_b)])
    assert rc_a == 0 and rc_b == 0
    bytes_a = (out_a / "katok-torus" / "latest" / "report.json").read_bytes()
    bytes_b = (out_b / "katok-torus" / "latest" / "report.json").read_bytes()
    ok = bytes_a == bytes_b
    payload = json.loads(bytes_a)
    assert payload["seed"] == 7
    _line(12, ok, f"reports identical ({len(bytes_a)} bytes), overall pass {payload['overall_pass']}")
    assert ok
    assert payload["overall_pass"]


def test_all_scenarios_pass_overall(
    rounds, katok_sphere_report, katok_torus_report, benchmark_report, smooth_division_report
):
    reports = {
        rep.scenario: rep.overall_pass
        for rep in (rounds, katok_sphere_report, katok_torus_report, benchmark_report, smooth_division_report)
    }
    print(f"[scenarios   ] {reports}")
    assert all(reports.values())

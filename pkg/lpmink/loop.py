"""
Subcommand drivers. Each loop_* reads the input deck and returns a Result
holding the JSON summary, the CSV tables and the nodal arrays of the run.
"""

import os
from dataclasses import dataclass, field

import numpy as np
from mpi4py import MPI

import lpmink.spectral as spectral
import lpmink.type_ as type_

from lpmink.constant import *
from lpmink.counterexample import (
    CriticalWeight,
    RadialWeight,
    certify_insolvability,
    critical_identity_error,
    resolve_radial_f,
)
from lpmink.ode_oracle import (
    TARGET_PERIOD,
    bifurcation,
    cross_validate,
    find_symmetric_solution,
    scan_heights,
    shoot,
    small_amplitude_period,
)
from lpmink.pohozaev import equator_jump, identity_integral, random_field
from lpmink.print_ import NumericalError, print_msg
from lpmink.sphere_geometry import make_grid, sphere_area
from lpmink.support_function import (
    SupportFunction,
    constant_weight,
    ellipsoid_solution,
    ma_residual,
)
from lpmink.symmetry import build_group, check_closure, simplex_vertices
from lpmink.variational import (
    audit_identity,
    gradient_fd_error,
    instability_threshold,
    is_trivial_constant,
    make_problem,
    minimize,
    second_variation_fd,
    second_variation_formula,
    seed_coeffs,
    to_dual,
)


@dataclass
class Result:
    summary: dict
    tables: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)
    status: int = EXIT_SUCCESS


# =============================================================================
# Work distribution
# =============================================================================


def distribute(func, items, workers=None):
    """
    [func(item) for item in items], with the items cut into `workers`
    contiguous chunks and chunk c evaluated on rank c % size. The gathered
    results are put back in item order, so they do not depend on the number
    of chunks or ranks. The first failure in item order is re-raised on
    every rank.
    """
    items = list(items)
    if not items:
        return []
    comm = MPI.COMM_WORLD
    size = comm.Get_size()
    rank = comm.Get_rank()
    if workers is None:
        workers = os.cpu_count() or 1
    chunks = np.array_split(np.arange(len(items)), min(max(workers, 1), len(items)))

    local = {}
    for c, index in enumerate(chunks):
        if c % size != rank:
            continue
        for i in index:
            try:
                local[int(i)] = (True, func(items[i]))
            except (ValueError, NumericalError) as error:
                local[int(i)] = (False, error)

    merged = {}
    for part in comm.allgather(local) if size > 1 else [local]:
        merged.update(part)

    results = []
    for i in range(len(items)):
        ok, value = merged[i]
        if not ok:
            raise value
        results.append(value)
    return results


def _grid_arrays(grid):
    return {"grid/nodes": grid.nodes, "grid/weights": grid.weights}


def _support_arrays(h, prefix):
    return {prefix + "/values": h.values, prefix + "/det_W": h.det, prefix + "/eig_min": h.eig_min}


# =============================================================================
# verify-pohozaev
# =============================================================================


def ellipse_matrix(n, a):
    """diag(a, a^{-1/n}, ..., a^{-1/n}), of determinant 1"""
    return np.diag([a] + [a ** (-1.0 / n)] * n)


def solution_pair(deck, grid):
    card = deck.pohozaev
    n = deck.grid["n"]
    p = deck.problem["p"]
    if card["solution"] == "ellipsoid":
        return ellipsoid_solution(ellipse_matrix(n, card["ellipse_a"]), p, grid)
    return SupportFunction.constant(n, 1.0, grid), constant_weight(1.0)


def refinement_levels(resolution):
    levels = [resolution // 4, resolution // 2, resolution]
    return [r for r in levels if r >= RESOLUTION_MIN and r % 2 == 0]


def loop_verify_pohozaev(deck):
    n = deck.grid["n"]
    p = deck.problem["p"]
    resolution = deck.grid["resolution"]
    workers = deck.setting["workers"]
    card = deck.pohozaev

    grid = make_grid(n, resolution)
    h, f = solution_pair(deck, grid)
    rng = np.random.default_rng(card["field_seed"])
    fields = [random_field(n, rng) for _ in range(card["N_field"])]

    integrals = distribute(lambda pf: identity_integral(f, h, p, pf, grid), fields, workers)
    one = SupportFunction.constant(n, 1.0, grid)
    beta_integrals = distribute(
        lambda pf: identity_integral(constant_weight(1.0), one, p, pf, grid), fields, workers
    )
    jumps = [equator_jump(pf, p) for pf in fields]

    def level(res):
        g = make_grid(n, res)
        h_res, f_res = solution_pair(deck, g)
        worst = max(abs(identity_integral(f_res, h_res, p, pf, g)) for pf in fields)
        return res, worst, ma_residual(h_res, f_res, p)

    levels = distribute(level, refinement_levels(resolution), workers)
    rows = np.array(levels, dtype=type_.make_type_refinement_row())

    print_msg(" Largest identity integral: %.6e" % max(abs(v) for v in integrals))

    summary = {
        "n": n,
        "p": p,
        "grid_resolution": resolution,
        "solution": card["solution"],
        "pf": [pf.to_dict() for pf in fields],
        "integral": integrals,
        "max_abs_integral": max(abs(v) for v in integrals),
        "max_abs_beta_integral": max(abs(v) for v in beta_integrals),
        "ma_residual": ma_residual(h, f, p),
        "equator_jump_field": max(j[0] for j in jumps),
        "equator_jump_beta": max(j[1] for j in jumps),
        "refinement": [{"resolution": int(r), "integral": v, "ma_residual": m} for r, v, m in levels],
    }
    arrays = _grid_arrays(grid)
    arrays.update(_support_arrays(h, "h"))
    return Result(summary, {"refinement": rows, "support": h.to_rows()}, arrays)


# =============================================================================
# build-counterexample
# =============================================================================


def loop_build_counterexample(deck):
    n = deck.grid["n"]
    p = deck.problem["p"]
    card = deck.counterexample
    grid = make_grid(n, deck.grid["resolution"])

    tables = {}
    arrays = _grid_arrays(grid)
    if card["kind"] == "critical":
        weight = CriticalWeight(n, card["D"], card["C"])
        summary = {
            "kind": "critical",
            "n": n,
            "p": weight.p,
            "D": weight.D,
            "C": weight.C,
            "identity_error": critical_identity_error(weight),
        }
    else:
        params = RadialWeight(n, p, card["phi_inf"], card["phi_k"], card["beta0"])
        weight = resolve_radial_f(params)
        summary = weight.to_dict()
        summary.update(
            {
                "kind": "radial",
                "limit": weight.limit(),
                "expected_limit": weight.expected_limit(),
                "pole_exponent": weight.pole_exponent(),
                "expected_pole_exponent": n * abs(weight.gamma),
                "ode_residual": weight.ode_residual(),
            }
        )
        tables["radial"] = weight.to_rows()
        arrays["radial/r"] = np.exp(weight.s_table)
        arrays["radial/f"] = weight.f_table

    certificate, rows = certify_insolvability(weight, weight.p, grid, return_rows=True)
    summary["certificate"] = certificate.to_dict()
    tables["certificate"] = rows
    arrays["certificate/K"] = rows["K"]
    print_msg(" Certificate: %s (%s)" % (certificate.certified, certificate.reason))

    status = EXIT_SUCCESS if certificate.certified else EXIT_NUMERICAL
    return Result(summary, tables, arrays, status)


# =============================================================================
# eigen
# =============================================================================


def witness_checks(frame, g, resolution=128):
    """Harmonicity, invariance, mean and Rayleigh quotient of the cubic witness."""
    n = frame.n
    h = spectral.build_h_simplex(frame)
    matrices = g.exact_matrices if (h.exact and g.exact_matrices is not None) else g.matrices
    poly = h if matrices is g.exact_matrices else h.to_float()
    invariance = 0.0
    for M in matrices:
        diff = (poly.compose(M) - poly).to_float()
        if diff.coeffs:
            invariance = max(invariance, max(abs(c) for c in diff.coeffs.values()))
    grid = make_grid(n, resolution)
    return {
        "harmonic": bool(h.is_harmonic()),
        "invariance_error": float(invariance),
        "sphere_mean": abs(float(h.sphere_integral())) / sphere_area(n),
        "ball_mean": abs(float(h.ball_mean())),
        "rayleigh_quotient": float(spectral.rayleigh_quotient(h.to_float(), grid)),
        "expected_eigenvalue": 3.0 * (n + 2),
    }


def eigen_summary(n, mode, mu_max, resolution=128):
    frame = simplex_vertices(n)
    g = build_group(frame, mode)
    mu1, sub, dims = spectral.first_invariant(n, g, mu_max)
    lam = spectral.lambda1(n, g, mu_max, make_grid(n, resolution))
    _, rank, null = spectral.degree_two_system(frame)
    return {
        "n": n,
        "mode": mode,
        "group_order": g.order,
        "group_closed": check_closure(g),
        "mu1": mu1,
        "lambda1": lam,
        "dims_by_degree": {str(mu): d for mu, d in dims.items()},
        "eigenfunction_count": sub.dimension,
        "degree_two_rank": rank,
        "degree_two_null_vector": None if null is None else null.tolist(),
        "witness": witness_checks(frame, g, resolution),
    }


def loop_eigen(deck):
    n = deck.grid["n"]
    summary = eigen_summary(n, deck.symmetry["mode"], deck.symmetry["mu_max"], deck.grid["resolution"])
    print_msg(" lambda_1(%i) = %.1f" % (n, summary["lambda1"]))
    return Result(summary)


# =============================================================================
# second-variation
# =============================================================================


def first_eigenfunction(n, mode=MODE_SPECIAL, mu_max=MU_MAX_DEFAULT):
    g = build_group(simplex_vertices(n), mode)
    _, sub, _ = spectral.first_invariant(n, g, mu_max)
    return sub.basis[0].to_float()


def loop_second_variation(deck):
    n = deck.grid["n"]
    p = deck.problem["p"]
    grid = make_grid(n, deck.grid["resolution"])
    xi = first_eigenfunction(n, deck.symmetry["mode"], deck.symmetry["mu_max"])
    threshold = instability_threshold(n, deck.symmetry["mu_max"])

    formula = second_variation_formula(xi, p, grid)
    fd = second_variation_fd(xi, p, grid)
    summary = {
        "n": n,
        "p": p,
        "threshold": threshold,
        "eigenfunction_degree": xi.degree,
        "second_variation": formula,
        "second_variation_displayed": second_variation_formula(xi, p, grid, prefactor="displayed"),
        "second_variation_fd": fd,
        "relative_gap": abs(fd - formula) / max(abs(formula), 1e-300),
        "below_threshold": second_variation_formula(xi, threshold - 0.1, grid),
        "above_threshold": second_variation_formula(xi, threshold + 0.1, grid),
        "stable": formula > 0.0,
    }
    return Result(summary)


# =============================================================================
# minimize
# =============================================================================


def history_rows(history):
    rows = np.zeros(len(history), dtype=type_.make_type_history_row())
    for k, name in enumerate(rows.dtype.names):
        rows[name] = history[:, k]
    return rows


def loop_minimize(deck):
    n = deck.grid["n"]
    p = deck.problem["p"]
    card = deck.optimizer
    prob = make_problem(
        n,
        p,
        deck.grid["resolution"],
        L=card["L"],
        mode=deck.symmetry["mode"],
        eps_c=card["eps_c"],
        step=card["step"],
        max_iter=card["max_iter"],
        tol=card["tol"],
        momentum=card["momentum"],
        progress=deck.setting["progress_bar"],
    )
    cp = minimize(prob, card["seed_amplitude"])
    grid = prob.grid
    _, lam_dual = to_dual(cp.u, p)
    audit = audit_identity(cp, p, np.random.default_rng(deck.setting["seed"]))

    summary = cp.to_dict()
    summary.update(
        {
            "n": n,
            "p": p,
            "basis_size": prob.basis.size,
            "I_constant": -sphere_area(n),
            "margin": -sphere_area(n) - cp.value,
            "trivial_constant": is_trivial_constant(cp.u),
            "lambda_dual": lam_dual,
            "identity_audit": audit,
            "max_abs_identity": max(abs(v) for v in audit),
        }
    )
    if n == 1 and p < -2.0:
        summary["cross_validation"] = cross_validate(cp.u, p).to_dict()

    arrays = _grid_arrays(grid)
    arrays.update(_support_arrays(cp.u, "u"))
    arrays["u/coefficients"] = cp.coeffs
    tables = {"support": cp.u.to_rows(), "history": history_rows(cp.history)}
    return Result(summary, tables, arrays)


# =============================================================================
# oracle and bifurcation
# =============================================================================


def scan_rows(p_values, h0s, workers):
    pairs = [(p, h0) for p in p_values for h0 in h0s]

    def row(pair):
        state = shoot(*pair)
        return pair[0], pair[1], state.period, state.energy_drift

    return np.array(distribute(row, pairs, workers), dtype=type_.make_type_scan_row())


def loop_oracle(deck):
    card = deck.oracle
    workers = deck.setting["workers"]
    h0s = scan_heights(card["h_max"], card["N_scan"])

    if card["scan"] is not None:
        p_values = np.linspace(card["scan"][0], card["scan"][1], N_SCAN_P)
        rows = scan_rows(p_values, h0s, workers)
        summary = {
            "scan": list(card["scan"]),
            "target_period": TARGET_PERIOD,
            "small_amplitude_periods": {"%.17g" % q: small_amplitude_period(q) for q in p_values},
        }
        return Result(summary, {"scan": rows})

    p = deck.problem["p"]
    rows = scan_rows([p], h0s, workers)
    solution = find_symmetric_solution(p, card["h_max"], card["N_scan"], deck.setting["progress_bar"])
    summary = {
        "p": p,
        "target_period": TARGET_PERIOD,
        "small_amplitude_period": small_amplitude_period(p),
        "found": solution is not None,
    }
    tables = {"scan": rows}
    arrays = {}
    if solution is not None:
        summary.update(
            {
                "h0": solution.h0,
                "period": solution.period,
                "amplitude": solution.amplitude,
                "energy_drift": solution.energy_drift,
                "ma_residual": solution.el_residual(),
            }
        )
        orbit = np.zeros(solution.h.size, dtype=type_.make_type_orbit_row())
        orbit["theta"] = solution.theta
        orbit["h"] = solution.h
        orbit["dh"] = solution.dh
        tables["orbit"] = orbit
        arrays["orbit/theta"] = solution.theta
        arrays["orbit/h"] = solution.h
    print_msg(" Symmetric solution found: %s" % summary["found"])
    return Result(summary, tables, arrays)


def loop_bifurcation(deck):
    card = deck.oracle
    threshold, rows = bifurcation(card["p_low"], card["p_high"], card["p_tol"], card["h_max"])
    print_msg(" Bifurcation exponent: %.6f" % threshold)
    summary = {
        "threshold": threshold,
        "p_low": card["p_low"],
        "p_high": card["p_high"],
        "p_tol": card["p_tol"],
        "bisection_steps": int(rows.size),
    }
    return Result(summary, {"bifurcation": rows})


# =============================================================================
# report
# =============================================================================


def _entry(name, value, target, passed):
    return {"name": name, "value": value, "target": target, "passed": bool(passed)}


def check_eigen():
    entries = []
    for n in (1, 2):
        for mode in (MODE_SPECIAL, MODE_FULL):
            s = eigen_summary(n, mode, MU_MAX_DEFAULT)
            dims = s["dims_by_degree"]
            entries.append(
                _entry("lambda1 n=%i %s" % (n, mode), s["lambda1"], 3.0 * (n + 2), s["lambda1"] == 3.0 * (n + 2))
            )
            entries.append(
                _entry(
                    "invariant dimensions n=%i %s" % (n, mode),
                    [dims.get(str(mu), 0) for mu in (1, 2, 3)],
                    "(0, 0, >=1)",
                    dims.get("1") == 0 and dims.get("2") == 0 and dims.get("3", 0) >= 1,
                )
            )
    return entries


def check_witness():
    entries = []
    for n in (1, 2):
        frame = simplex_vertices(n)
        w = witness_checks(frame, build_group(frame, MODE_SPECIAL))
        entries.append(_entry("witness harmonic n=%i" % n, w["harmonic"], True, w["harmonic"]))
        entries.append(
            _entry("witness invariance n=%i" % n, w["invariance_error"], 1e-12, w["invariance_error"] <= 1e-12)
        )
        entries.append(_entry("witness mean n=%i" % n, w["sphere_mean"], 1e-12, w["sphere_mean"] <= 1e-12))
        gap = abs(w["rayleigh_quotient"] - w["expected_eigenvalue"])
        entries.append(_entry("witness Rayleigh quotient n=%i" % n, w["rayleigh_quotient"], w["expected_eigenvalue"], gap <= 1e-8))
    return entries


def check_pohozaev():
    entries = []
    n, p = 1, -2.0
    rng = np.random.default_rng(90053)
    fields = [random_field(n, rng) for _ in range(10)]
    for a in (1.1, 1.3, 2.0):
        levels = []
        for res in (128, 256, 512):
            grid = make_grid(n, res)
            h, f = ellipsoid_solution(ellipse_matrix(n, a), p, grid)
            levels.append(max(abs(identity_integral(f, h, p, pf, grid)) for pf in fields))
        decreasing = all(levels[k + 1] <= max(levels[k], 1e-12) for k in range(2))
        entries.append(_entry("identity ellipse a=%g" % a, levels, 1e-8, levels[-1] <= 1e-8 and decreasing))
    grid = make_grid(n, 512)
    one = SupportFunction.constant(n, 1.0, grid)
    for q in (-3.0, -4.0, -6.0):
        worst = max(abs(identity_integral(constant_weight(1.0), one, q, pf, grid)) for pf in fields)
        entries.append(_entry("beta integral p=%g" % q, worst, 1e-10, worst <= 1e-10))
    return entries


def check_critical():
    weight = CriticalWeight(1, 4.0, 1.0)
    error = critical_identity_error(weight, 512)
    certificate = certify_insolvability(weight, weight.p, make_grid(1, 512))
    return [
        _entry("critical identity", error, 1e-9, error <= 1e-9),
        _entry(
            "critical certificate",
            certificate.fraction_negative,
            CERTIFY_FRACTION,
            certificate.certified and certificate.fraction_negative >= CERTIFY_FRACTION,
        ),
    ]


def check_radial():
    entries = []
    for n in (1, 2):
        grid = make_grid(n, 128 if n == 1 else 32)
        for p in (-n - 2.0, -n - 4.0):
            profile = resolve_radial_f(RadialWeight(n, p))
            tag = "n=%i p=%g" % (n, p)
            residual = profile.ode_residual()
            entries.append(_entry("radial ODE residual " + tag, residual, 1e-8, residual <= 1e-8))
            limit = profile.limit()
            target = profile.expected_limit()
            entries.append(_entry("radial limit " + tag, limit, target, abs(limit - target) <= 1e-4))
            exponent = profile.pole_exponent()
            target = n * abs(profile.gamma)
            entries.append(_entry("radial pole exponent " + tag, exponent, target, abs(exponent - target) <= 1e-3))
            certificate = certify_insolvability(profile, p, grid)
            entries.append(
                _entry(
                    "radial certificate " + tag,
                    certificate.max_deviation,
                    1e-7,
                    certificate.certified and certificate.max_deviation <= 1e-7,
                )
            )
    return entries


def check_second_variation():
    entries = []
    for n, p_fd, res in ((1, -8.0, 128), (2, -10.0, 32)):
        grid = make_grid(n, res)
        xi = first_eigenfunction(n)
        P = instability_threshold(n)
        below = second_variation_formula(xi, P - 0.1, grid)
        above = second_variation_formula(xi, P + 0.1, grid)
        entries.append(_entry("second variation sign n=%i" % n, [below, above], "(-, +)", below < 0.0 < above))
        formula = second_variation_formula(xi, p_fd, grid)
        fd = second_variation_fd(xi, p_fd, grid)
        gap = abs(fd - formula) / abs(formula)
        entries.append(_entry("second variation fd n=%i" % n, gap, 1e-3, gap <= 1e-3))
    return entries


def check_oracle():
    threshold, _ = bifurcation(-9.0, -6.0, 1e-4)
    solution = find_symmetric_solution(-8.0)
    residual = solution.el_residual() if solution is not None else float("nan")
    none = find_symmetric_solution(-6.0)
    return [
        _entry("bifurcation exponent", threshold, -7.0, abs(threshold + 7.0) <= 1e-3),
        _entry("oracle solution p=-8", residual, 1e-8, solution is not None and residual < 1e-8),
        _entry("oracle none p=-6", none is None, True, none is None),
    ]


def check_minimize_planar():
    prob = make_problem(1, -8.0, 192)
    grad_error = gradient_fd_error(prob, seed_coeffs(prob, 0.05))
    cp = minimize(prob, 0.05)
    margin = -2.0 * PI - cp.value
    distance = cross_validate(cp.u, -8.0).distance
    stable = minimize(make_problem(1, -6.0, 192), 0.05)
    return [
        _entry("gradient fd agreement", grad_error, 1e-6, grad_error <= 1e-6),
        _entry("minimizer n=1 non-constant", cp.non_constancy, 1e-3, cp.non_constancy > 1e-3),
        _entry("minimizer n=1 margin", margin, 1e-4, margin > 1e-4),
        _entry("minimizer n=1 EL residual", cp.el_residual, 1e-6, cp.el_residual < 1e-6),
        _entry("minimizer n=1 oracle distance", distance, 1e-4, distance < 1e-4),
        _entry("minimizer n=1 p=-6 constant", stable.non_constancy, 1e-6, stable.non_constancy < 1e-6),
    ]


def check_minimize_spatial():
    residuals = []
    for L in (6, 10, 14):
        cp = minimize(make_problem(2, -10.0, 32, L=L), 0.05)
        residuals.append(cp.el_residual)
    margin = -4.0 * PI - cp.value
    audit = audit_identity(cp, -10.0, np.random.default_rng(90053))
    worst = max(abs(v) for v in audit)
    return [
        _entry("minimizer n=2 margin", margin, 0.0, margin > 0.0 and cp.non_constancy > 1e-3),
        _entry(
            "minimizer n=2 EL refinement",
            residuals,
            "decreasing",
            all(residuals[k + 1] < residuals[k] for k in range(2)),
        ),
        _entry("minimizer n=2 identity audit", worst, 1e-6, worst <= 1e-6),
    ]


REPORT_CHECKS = [
    check_eigen,
    check_witness,
    check_pohozaev,
    check_critical,
    check_radial,
    check_second_variation,
    check_oracle,
    check_minimize_planar,
    check_minimize_spatial,
]


def run_check(check):
    try:
        return check()
    except (ValueError, NumericalError) as error:
        return [dict(_entry(check.__name__, None, None, False), error=str(error))]


def loop_report(deck):
    groups = distribute(run_check, REPORT_CHECKS, deck.setting["workers"])
    entries = [entry for group in groups for entry in group]
    failed = [entry["name"] for entry in entries if not entry["passed"]]
    for entry in entries:
        print_msg(" %-45s %s" % (entry["name"], "PASS" if entry["passed"] else "FAIL"))
    summary = {
        "checks": entries,
        "passed": len(entries) - len(failed),
        "failed": failed,
        "all_passed": not failed,
    }
    return Result(summary, status=EXIT_SUCCESS if not failed else EXIT_NUMERICAL)


LOOPS = {
    "verify-pohozaev": loop_verify_pohozaev,
    "build-counterexample": loop_build_counterexample,
    "eigen": loop_eigen,
    "second-variation": loop_second_variation,
    "minimize": loop_minimize,
    "oracle": loop_oracle,
    "bifurcation": loop_bifurcation,
    "report": loop_report,
}

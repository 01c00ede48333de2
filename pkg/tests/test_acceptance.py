"""Acceptance gate: one PASS/FAIL line per criterion in the terminal summary."""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from lsvp import zoo
from lsvp.gridfn import ExponentPair, GridFunction, GridSpec, barycenter, gaussian, sample, translate
from lsvp.products import (
    hjb_residual, hypercontract_check, laplace_lp_bound_check, log_gaussian_bound, monotonicity_sweep,
    mp_product, p_limit_sweep, volume_product,
)
from lsvp.santalo import OutcomeKind, log_double_laplace, objective_gradient_hessian
from lsvp.semigroups import FlowKind, convert_heat_fp_check, evolve, ou
from lsvp.transforms import essential_polar, legendre_bruteforce, p_laplace
from lsvp.zoo import half_cell_axis

TIMES = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
GAUSSIANS = [n for n in zoo.names() if zoo.get(n).gaussian]
INTEGRABLE = [n for n in zoo.names() if zoo.get(n).integrable]


def _gauss_window(sigma, dim):
    half = 10.0 if sigma <= 1.0 else 15.0
    return GridSpec.box(-half, half, 2001 if dim == 1 else 257, dim=dim)


def test_criterion_1_gaussian_equality(verdict):
    start = time.perf_counter()
    worst = 0.0
    for dim in (1, 2):
        for sigma in (0.5, 1.0, 2.0):
            f = gaussian(_gauss_window(sigma, dim), sigma)
            for p in (0.25, 0.5, 0.75):
                rep = mp_product(f, p)
                bound = log_gaussian_bound(ExponentPair.from_p(p), dim)
                worst = max(worst, abs(rep.log_Mp - bound) / abs(bound))
    elapsed = time.perf_counter() - start
    verdict("criterion 1", worst <= 2e-4 and elapsed <= 60.0,
            f"max relative log error {worst:.2e} (tol 2e-4), {elapsed:.1f} s (limit 60 s)")


def test_criterion_2_laplace_norm_constant(verdict):
    gauss_worst, zoo_worst, bad = 0.0, math.inf, []
    for name in zoo.names():
        chk = laplace_lp_bound_check(zoo.build(name), 0.5)
        if name in GAUSSIANS:
            gauss_worst = max(gauss_worst, abs(chk.margin))
            if abs(chk.margin) > 2e-4:
                bad.append(name)
        zoo_worst = min(zoo_worst, chk.margin)
        if chk.margin < -2e-4:
            bad.append(name)
    verdict("criterion 2", not bad,
            f"Gaussian |margin| <= {gauss_worst:.2e}, smallest zoo margin {zoo_worst:.3e}, violations {bad}")


def _certificate(f, p, rep):
    g = translate(f, rep.santalo.point)
    if p == 0.0:
        lp = essential_polar(g, rep.dual)
    else:
        lp = p_laplace(g, ExponentPair.from_p(p), rep.dual)
    return float(np.max(np.abs(barycenter(lp))))


def test_criterion_3_santalo_certificates(verdict):
    worst_bar, worst_even, shift_err, count = 0.0, 0.0, 0.0, 0
    for name in INTEGRABLE:
        fx = zoo.get(name)
        f = fx.build()
        for p in (0.0, 0.25, 0.5, 0.75):
            rep = volume_product(f) if p == 0.0 else mp_product(f, p)
            if rep.santalo.kind is not OutcomeKind.Attained:
                continue
            count += 1
            worst_bar = max(worst_bar, _certificate(f, p, rep))
            if fx.even:
                worst_even = max(worst_even, float(np.max(np.abs(rep.santalo.point))))
            if name == "gauss1_shift":
                shift_err = max(shift_err, abs(rep.santalo.point[0] + 0.7))
    ok = worst_bar <= 1e-6 and worst_even <= 1e-6 and shift_err <= 1e-5
    verdict("criterion 3", ok,
            f"{count} attained outcomes, max |bar| {worst_bar:.1e}, even |s| {worst_even:.1e}, "
            f"shifted Gaussian |s + 0.7| {shift_err:.1e}")


def test_criterion_4_dichotomy(verdict):
    # a disagreement raises DichotomyMismatch inside mp_product
    for name in zoo.names():
        for p in (0.0, 0.5):
            f = zoo.build(name)
            volume_product(f) if p == 0.0 else mp_product(f, p)
    f = zoo.build("halfline")
    problems = []
    for kind in (FlowKind.Heat, FlowKind.FokkerPlanck):
        kinds = []
        for t in TIMES:
            rep = mp_product(evolve(f, kind, t), 0.5)
            kinds.append(rep.santalo.kind)
        if kinds[0] is not OutcomeKind.InfimumZero:
            problems.append(f"{kind.value}: t=0 gave {kinds[0].value}")
        if any(k is not OutcomeKind.Attained for k in kinds[1:]):
            problems.append(f"{kind.value}: not attained for some t >= 0.25")
        first = next((i for i, k in enumerate(kinds) if k is OutcomeKind.Attained), len(kinds))
        if any(k is not OutcomeKind.Attained for k in kinds[first:]):
            problems.append(f"{kind.value}: attained then lost")
    verdict("criterion 4", not problems, "solver and support test agree on the zoo; half-line "
            + ("InfimumZero at t=0, Attained for t >= 0.25 under both flows" if not problems else str(problems)))


def test_criterion_5_monotonicity(verdict):
    bad = []
    for name in zoo.names():
        f = zoo.build(name)
        for p in (0.0, 0.25, 0.5):
            bound = log_gaussian_bound(ExponentPair.from_p(p), f.dim)
            for kind in (FlowKind.Heat, FlowKind.FokkerPlanck):
                c = monotonicity_sweep(f, p, kind, TIMES)
                if c.error or not c.steps_ok(1e-5) or any(v > bound + 2e-4 for v in c.mp_log):
                    bad.append((name, p, kind.value, c.error))
    verdict("criterion 5", not bad, f"{len(zoo.names()) * 6} curves, failures {bad}")


def test_criterion_6_hjb_residual(verdict):
    zs = [[-0.5], [-0.25], [0.0], [0.25], [0.5]]
    worst, pairs, bad = 0.0, 0, []
    for name in [n for n in zoo.names() if zoo.get(n).compact]:
        for t in (0.5, 1.0, 2.0):
            rep = hjb_residual(zoo.build(name), 0.5, t, zs)
            pairs += len(zs)
            worst = max(worst, rep.budget)
            if not rep.ok() or rep.budget > 1e-4:
                bad.append((name, t))
    verdict("criterion 6", not bad and pairs >= 30,
            f"{pairs} (t, z) pairs, residual >= -budget everywhere, largest budget {worst:.1e} (limit 1e-4)")


def test_criterion_7_p_limit(verdict):
    lines, ok = [], True
    for name in ("gauss1", "box11", "abs_exp"):
        tab = p_limit_sweep(zoo.build(name), [0.2, 0.1, 0.05, 0.02])
        dec_t = all(b < a for a, b in zip(tab.gap_transform, tab.gap_transform[1:]))
        dec_m = all(b < a for a, b in zip(tab.gap_product, tab.gap_product[1:]))
        ok &= dec_t and dec_m
        lines.append(f"{name}: transform gaps {'decrease' if dec_t else 'NOT monotone'}, product gaps "
                     + ("decrease" if dec_m else "NOT monotone " + str([round(g, 4) for g in tab.gap_product])))
    g = volume_product(zoo.build("gauss1")).log_Mp
    b = math.exp(volume_product(zoo.build("box11")).log_Mp)
    ok &= abs(math.exp(g) - 2 * math.pi) <= 2e-4 * 2 * math.pi and abs(b - 4.0) <= 1e-3
    lines.append(f"M(gamma) = {math.exp(g):.6f}, M(box) = {b:.5f}")
    verdict("criterion 7", ok, "; ".join(lines))


def _wide_1d(name):
    return zoo.build(name, GridSpec(*half_cell_axis(-20.0, 20.0, 0.01)))


def _wide_2d(name):
    if name == "box_gauss2d":
        xa = half_cell_axis(-20.0, 20.0, 0.1)
        return zoo.build(name, GridSpec((xa[0], -20.0), (xa[1], 20.0), (xa[2], 401)))
    return zoo.build(name, GridSpec.box(-20, 20, 401, dim=2))


def test_criterion_8_hypercontractivity(verdict):
    p = 0.5
    eq = []
    for sigma_prime in (0.6, 0.8, 1.5):
        beta = (1 / sigma_prime - 1) / (2 * p)
        f = sample(GridSpec(-20, 20, 4001), lambda x, b=beta: -b * x * x)
        eq.append(abs(hypercontract_check(f, p).margin))
    eq.append(abs(hypercontract_check(sample(GridSpec(-20, 20, 4001), lambda x: 0.0 * x), p).margin))
    worst_eq = max(eq)
    margins = {}
    centered = [n for n in zoo.names() if zoo.get(n).even]
    for name in centered:
        f = _wide_1d(name) if zoo.get(name).dim == 1 else _wide_2d(name)
        for p1, p2 in [(p, p / (p - 1)), (p / 2, p / (p - 1) / 2)]:
            margins[(name, p1)] = hypercontract_check(f, p, p1, p2).margin
    worst = min(margins.values())
    verdict("criterion 8", worst_eq <= 5e-4 and worst >= -1e-5,
            f"equality family |margin| <= {worst_eq:.1e}; {len(margins)} centered checks, min margin {worst:.2e}")


def test_criterion_9_oracles(verdict):
    rng = np.random.default_rng(20)
    polar_err = 0.0
    for n in (16, 128, 512):
        spec = GridSpec(-2.0, 2.0, n)
        logv = -(np.linspace(-2, 2, n) ** 2 / 2 + rng.normal(scale=0.2, size=n))
        logv[rng.random(n) < 0.1] = -np.inf
        f = GridFunction(spec, logv)
        dual = GridSpec(-5, 5, 257)
        fast = essential_polar(f, dual, edge_rule=False).logv
        slow = -legendre_bruteforce(f, dual)
        polar_err = max(polar_err, float(np.max(np.abs(fast - slow))))

    f = zoo.build("quartic2d")
    pq = ExponentPair.from_p(0.5)
    lp = p_laplace(f, pq, GridSpec.box(-6, 6, 97, dim=2))
    grad_err = 0.0
    for z in ([0.0, 0.0], [0.4, -0.3], [-0.8, 0.5]):
        z = np.array(z)
        _, g, _ = objective_gradient_hessian(lp, pq.q, z)
        fd = np.array([(log_double_laplace(lp, pq.q, z + e) - log_double_laplace(lp, pq.q, z - e)) / 2e-5
                       for e in np.eye(2) * 1e-5])
        grad_err = max(grad_err, float(np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g))))

    box = zoo.build("box11", GridSpec(*half_cell_axis(-12.0, 12.0, 2.5e-4)))
    out = GridSpec(-2.5, 2.5, 11)
    ou_err = 0.0
    for t in (0.2, 1.0):
        u = ou(box, t, out)
        a, s = math.exp(-t), -math.expm1(-2 * t)
        for x, v in zip(out.axes()[0], u.logv):
            want, _ = integrate.quad(lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi),
                                     (-1 - a * x) / math.sqrt(s), (1 - a * x) / math.sqrt(s),
                                     epsabs=1e-15, epsrel=1e-13)
            ou_err = max(ou_err, abs(math.exp(v) - want))

    rough = [zoo.build("box11"), zoo.build("box02"), zoo.build("abs_exp", GridSpec(-30, 30, 6001))]
    conv_rough = max(convert_heat_fp_check(f, t) for f in rough for t in (0.25, 1.0))
    conv_gauss = max(convert_heat_fp_check(zoo.build(n), t) for n in ("gauss1", "gauss2") for t in (0.25, 1.0))

    ok = polar_err <= 1e-12 and grad_err <= 1e-6 and ou_err <= 1e-7 and conv_rough <= 5e-4 and conv_gauss <= 1e-6
    verdict("criterion 9", ok,
            f"polar vs brute force {polar_err:.1e}, gradient vs FD {grad_err:.1e}, OU vs quad {ou_err:.1e}, "
            f"heat/FP conversion {conv_rough:.1e} (rough) {conv_gauss:.1e} (Gaussian)")


def _cli(out, threads):
    env = dict(os.environ, LSVP_THREADS=str(threads))
    args = [sys.executable, "-m", "lsvp.cli", "run", "--experiment", "Monotonicity", "--fixture", "box02",
            "--p", "0", "--p", "0.25", "--p", "0.5", "--t", "0", "--t", "0.5", "--t", "1", "--out", str(out)]
    subprocess.run(args, env=env, check=True, capture_output=True)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "report.meta.json"}


def test_criterion_10_determinism(verdict, tmp_path):
    a = _cli(tmp_path / "a", 1)
    b = _cli(tmp_path / "b", 1)
    c = _cli(tmp_path / "c", 4)
    verdict("criterion 10", a == b == c and len(a) == 4,
            f"{len(a)} output files byte-identical across repeated runs and LSVP_THREADS in {{1, 4}}")

"""Functional volume products, flow sweeps and the inequality checks around them."""

from dataclasses import dataclass, field, replace
import enum
import math

import numpy as np

from .gridfn import (
    GAUSSIAN, ExponentPair, GridFunction, GridSpec, ParameterError, barycenter,
    integral_report, log_integrand_report, log_gaussian_density, lp_norm_report, translate,
)
from .santalo import (
    ConfigurationError, Dichotomy, DichotomyMismatch, OutcomeKind, SantaloOutcome, SolverOptions,
    _minimize, log_double_laplace, objective_gradient_hessian, support_dichotomy, tilted_edge_share,
)
from .semigroups import FlowKind, evolve, heat, heat_window, ou, ou_window
from .transforms import (
    dual_grid_heuristic, essential_polar, fit_window, p_laplace, refine_window, support_box,
)

LOG_2PI = math.log(2.0 * math.pi)


def gaussian_constants(p, n):
    """``(log C_p, log M_p(gamma))`` for ``p`` in ``(0, 1)`` in dimension ``n``."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise ParameterError("p must lie in (0,1)")
    if int(n) != n or n < 1:
        raise ParameterError("dimension must be a positive integer")
    q = p / (p - 1.0)
    log_cp = 0.5 * n * (math.log(p) / p - math.log(-q) / q) + n * LOG_2PI / q
    log_mp = 0.5 * n * (-p * math.log(p) + (1.0 - p) * math.log1p(-p)) + n * (1.0 - p) * LOG_2PI
    return log_cp, log_mp


def log_gaussian_bound(pq, n):
    if pq.is_polar:
        return n * LOG_2PI
    return gaussian_constants(pq.p, n)[1]


@dataclass(frozen=True)
class ProductOptions:
    solver: SolverOptions = field(default_factory=SolverOptions)
    n_dual: int | None = None
    n_coarse: int | None = None
    depth: float = 60.0
    cap: float | None = None
    edge_tol: float = 1e-8
    dichotomy_tol: float = 1e-12
    recenter: bool = True

    def dual_nodes(self, dim, polar=False):
        if self.n_dual:
            return self.n_dual
        if dim == 1:
            return 16001 if polar else 4001
        return 257

    def coarse_nodes(self, dim):
        return self.n_coarse or (129 if dim == 1 else 33)


@dataclass(frozen=True)
class ProductReport:
    p: float
    log_integral_f: float
    santalo: SantaloOutcome | None
    log_Mp: float
    log_gaussian_bound: float
    ratio_log: float
    tail_flags: tuple = ()
    dichotomy: Dichotomy | None = None
    dual: GridSpec | None = None
    center: tuple | None = None

    def to_record(self):
        return {
            "p": self.p,
            "log_integral_f": self.log_integral_f,
            "santalo": None if self.santalo is None else self.santalo.to_record(),
            "log_Mp": self.log_Mp,
            "log_gaussian_bound": self.log_gaussian_bound,
            "ratio_log": self.ratio_log,
            "tail_flags": list(self.tail_flags),
            "dichotomy": None if self.dichotomy is None else self.dichotomy.value,
        }


@dataclass
class _Solve:
    lp: GridFunction
    outcome: SantaloOutcome
    dichotomy: Dichotomy
    offset: np.ndarray
    flags: list


def _as_pair(pq):
    return pq if isinstance(pq, ExponentPair) else ExponentPair.from_p(pq)


def _dual_q(pq):
    return -1.0 if pq.is_polar else pq.q


def _builder(g, pq, edge_tol):
    if pq.is_polar:
        return lambda spec: essential_polar(g, spec, refine=True)
    return lambda spec: p_laplace(g, pq, spec, edge_tol)


def _default_cap(g, pq):
    reach = max(max(abs(a), abs(b)) for a, b in support_box(g))
    scale = 1.0 if pq.is_polar else pq.p
    return max(64.0, 4.0 * reach) / scale


def _window(g, pq, opts, tilts=None, cap=None):
    dim = g.dim
    C = cap or opts.cap or _default_cap(g, pq)
    nc = opts.coarse_nodes(dim)
    cap_spec = GridSpec((-C,) * dim, (C,) * dim, (nc,) * dim)
    start = dual_grid_heuristic(g, pq, cap_spec).spec
    build = _builder(g, pq, opts.edge_tol)
    return fit_window(lambda s: build(s).logv, start, cap_spec, nc, opts.depth, tilts), cap_spec


def _widen(window, cap):
    lo, hi = [], []
    for a, b, ca, cb in zip(window.lo, window.hi, cap.lo, cap.hi):
        w = b - a
        lo.append(max(ca, a - 0.5 * w))
        hi.append(min(cb, b + 0.5 * w))
    return GridSpec(tuple(lo), tuple(hi), window.n)


def _solve(f, pq, opts, recenter=True):
    """Transform ``f`` (recentered when possible) and minimize over translations."""
    flags = []
    rep = integral_report(f)
    if rep.tail_suspect:
        flags.append("tail-suspect:integral")
    if recenter and opts.recenter and not rep.tail_suspect:
        offset = barycenter(f)
    else:
        offset = np.zeros(f.dim)
    g = translate(f, -offset)
    q = _dual_q(pq)
    window, cap = _window(g, pq, opts)
    build = _builder(g, pq, opts.edge_tol)
    n = opts.dual_nodes(f.dim, pq.is_polar)
    for _ in range(6):
        dual = refine_window(window, n)
        lp = build(dual)
        if not lp.is_nonzero():
            raise ConfigurationError("transform vanishes on the whole dual window")
        dich = support_dichotomy(lp, opts.dichotomy_tol)
        outcome = _minimize(lp, q, opts.solver)
        if outcome.kind is OutcomeKind.Attained:
            share = tilted_edge_share(lp, q, outcome.point)
            if share > math.log(opts.edge_tol) and window != _widen(window, cap):
                window = _widen(window, cap)
                continue
            if share > math.log(opts.edge_tol):
                flags.append("tail-suspect:dual-window")
        break
    if (outcome.kind is OutcomeKind.Attained) != (dich is Dichotomy.OriginInterior):
        raise DichotomyMismatch(
            f"solver verdict {outcome.kind.value} disagrees with support test {dich.value}")
    return _Solve(lp, outcome, dich, offset, flags)


def _shift_outcome(outcome, offset):
    if outcome.point is None:
        return outcome
    return replace(outcome, point=outcome.point - offset)


def _log_mp(pq, n, log_int, log_inf):
    p, q = pq.p, pq.q
    return -(n * p / q) * math.log(p) + log_int - (p / q) * log_inf


def _zero_report(pq, n, flags):
    bound = log_gaussian_bound(pq, n)
    return ProductReport(pq.p, -math.inf, None, -math.inf, bound, -math.inf, tuple(flags))


def mp_product(f, pq, opts=None):
    """``log M_p(f)`` with the Santalo point and diagnostics.

    ``log M_p = -(np/q) log p + log int f - (p/q) log inf_z int Lp(tau_z f)``.
    An unbounded-below objective, a zero function or a tail-suspect integral
    all give ``log_Mp = -inf``; the report keeps the reason apart.
    """
    pq = _as_pair(pq)
    if pq.is_polar:
        return volume_product(f, opts)
    opts = opts or ProductOptions()
    n = f.dim
    if not f.is_nonzero():
        return _zero_report(pq, n, ["zero-function"])
    log_int = integral_report(f).log_value
    sol = _solve(f, pq, opts)
    out = _shift_outcome(sol.outcome, sol.offset)
    bound = log_gaussian_bound(pq, n)
    if out.kind is OutcomeKind.InfimumZero or sol.flags:
        log_mp = -math.inf
    else:
        log_mp = _log_mp(pq, n, log_int, out.log_inf)
    return ProductReport(pq.p, log_int, out, log_mp, bound, log_mp - bound, tuple(sol.flags),
                         sol.dichotomy, sol.lp.spec)


def volume_product(f, opts=None):
    """``log M(f) = log int f + log inf_z int (tau_z f)^polar``, bounded by ``n log 2 pi``."""
    pq = ExponentPair.from_p(0.0)
    opts = opts or ProductOptions()
    n = f.dim
    if not f.is_nonzero():
        return _zero_report(pq, n, ["zero-function"])
    log_int = integral_report(f).log_value
    sol = _solve(f, pq, opts)
    out = _shift_outcome(sol.outcome, sol.offset)
    bound = log_gaussian_bound(pq, n)
    if out.kind is OutcomeKind.InfimumZero or sol.flags:
        log_m = -math.inf
    else:
        log_m = log_int + out.log_inf
    return ProductReport(0.0, log_int, out, log_m, bound, log_m - bound, tuple(sol.flags),
                         sol.dichotomy, sol.lp.spec)


class BoundExceeded(RuntimeError):
    """A centered product came out above the Gaussian bound."""


class Centering(enum.Enum):
    CenterF = "CenterF"
    CenterLp = "CenterLp"


def mp_centered(f, pq, which, opts=None, check_tol=2e-4):
    """Product evaluated at ``z = 0`` after one of two recenterings.

    ``CenterF`` translates ``f`` to barycenter zero. ``CenterLp`` multiplies
    ``f`` by ``exp(z . y)`` with ``z = p bar(Lp f)``, which translates the
    transform by ``-bar(Lp f)``. Raises when the result exceeds the Gaussian
    bound by more than ``check_tol``.
    """
    pq = _as_pair(pq)
    if pq.is_polar:
        raise ParameterError("centered products need p > 0")
    opts = opts or ProductOptions()
    which = Centering(which)
    n = f.dim
    rep = integral_report(f)
    if not f.is_nonzero() or rep.tail_suspect:
        raise ParameterError("centered products need a nonzero, cleanly integrable f")
    q = pq.q
    if which is Centering.CenterF:
        b = barycenter(f)
        g = translate(f, -b)
        window, _ = _window(g, pq, opts)
        lp = p_laplace(g, pq, refine_window(window, opts.dual_nodes(n)), opts.edge_tol)
        log_int = rep.log_value
        center = tuple(float(v) for v in b)
    else:
        window, _ = _window(f, pq, opts)
        lp = p_laplace(f, pq, refine_window(window, opts.dual_nodes(n)), opts.edge_tol)
        if tilted_edge_share(lp, q, np.zeros(n)) > math.log(opts.edge_tol):
            raise ParameterError("the p-Laplace transform is not integrable on its window")
        m = barycenter(lp)
        z = pq.p * m
        tilt = sum(zk * xk for zk, xk in zip(z, f.mesh()))
        log_int = log_integrand_report(f.spec, f.logv + tilt).log_value
        center = tuple(float(v) for v in z)
    G0 = log_double_laplace(lp, q, np.zeros(n))
    log_mp = _log_mp(pq, n, log_int, G0)
    bound = log_gaussian_bound(pq, n)
    if log_mp - bound > check_tol:
        raise BoundExceeded(f"centered product exceeds the Gaussian bound by {log_mp - bound:.3e}")
    return ProductReport(pq.p, log_int, None, log_mp, bound, log_mp - bound, (), None, lp.spec, center)


@dataclass(frozen=True)
class BoundCheck:
    lhs_log: float
    rhs_log: float
    margin: float
    santalo: SantaloOutcome | None = None


def laplace_lp_bound_check(f, pq, opts=None):
    """``sup_z log ||L(tau_z f)||_q`` against ``log C_p + log ||f||_p``.

    The left side is ``(1/q) log inf_z int Lp(tau_z f^p)``, so it reuses the
    Santalo solver on ``f^p``.
    """
    pq = _as_pair(pq)
    if pq.is_polar:
        raise ParameterError("the Laplace norm bound needs p > 0")
    opts = opts or ProductOptions()
    if not f.is_nonzero():
        raise ParameterError("the Laplace norm bound needs f nonzero")
    fp = f.with_logv(pq.p * f.logv)
    sol = _solve(fp, pq, opts)
    if sol.outcome.kind is OutcomeKind.InfimumZero:
        lhs = math.inf
    else:
        lhs = sol.outcome.log_inf / pq.q
    log_cp, _ = gaussian_constants(pq.p, f.dim)
    rhs = log_cp + integral_report(fp).log_value / pq.p
    return BoundCheck(lhs, rhs, lhs - rhs, _shift_outcome(sol.outcome, sol.offset))


@dataclass
class MonotonicityCurve:
    times: list
    alpha_log: list
    mp_log: list
    santalo_points: list
    kinds: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    error: str | None = None

    def steps_ok(self, slack=1e-5):
        """Whether consecutive ``mp_log`` values never drop by more than ``slack``."""
        v = self.mp_log
        return all(b >= a - slack for a, b in zip(v, v[1:]))


def monotonicity_sweep(f, pq, kind, times, opts=None):
    """Products of ``f`` evolved along a flow; ``p = 0`` uses the polar product.

    A failing stage stops the sweep; the curve computed so far is returned
    with ``error`` set.
    """
    pq = _as_pair(pq)
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
        raise ParameterError("times must be strictly increasing and nonnegative")
    curve = MonotonicityCurve(times, [], [], [])
    for t in times:
        try:
            ft = evolve(f, kind, t)
            rep = volume_product(ft, opts) if pq.is_polar else mp_product(ft, pq, opts)
        except Exception as exc:  # partial curve is part of the contract
            curve.error = f"t={t}: {type(exc).__name__}: {exc}"
            break
        s = rep.santalo
        curve.alpha_log.append(s.log_inf if s is not None else -math.inf)
        curve.mp_log.append(rep.log_Mp)
        curve.santalo_points.append(None if s is None or s.point is None else [float(v) for v in s.point])
        curve.kinds.append(None if s is None else s.kind.value)
        curve.flags.append(list(rep.tail_flags))
    return curve


@dataclass(frozen=True)
class HJBReport:
    z: list
    residuals: list
    budgets: list
    dQdt: list
    grad_norm: list
    dt: float
    dz: float

    @property
    def budget(self):
        return max(self.budgets) if self.budgets else 0.0

    def ok(self):
        return all(r >= -b for r, b in zip(self.residuals, self.budgets))


def hjb_residual(f, pq, t, z_samples, dt=None, dz=1e-3, opts=None):
    """Finite-difference residual of ``dQ/dt + (p / 2|q|) |grad_z Q|^2`` for the heat flow.

    ``Q(t, z) = log int Lp(tau_z E_t f)``. The heat flows at the five times
    ``t + k dt`` share one output grid and the transforms share one dual grid,
    so the differences see only smooth dependence. Each residual comes with a
    budget from the observed third differences plus a round-off term.
    """
    pq = _as_pair(pq)
    if pq.is_polar:
        raise ParameterError("the residual needs p > 0")
    opts = opts or ProductOptions()
    t = float(t)
    dt = 1e-3 * max(t, 1.0) if dt is None else float(dt)
    if not t - 2.0 * dt > 0.0:
        raise ParameterError("t must exceed twice the time step")
    q, p = pq.q, pq.p
    n = f.dim
    zs = [np.atleast_1d(np.asarray(z, dtype=np.float64)) for z in z_samples]
    out = heat_window(f, t + 2.0 * dt)
    taus = [t + k * dt for k in (-2, -1, 0, 1, 2)]
    flows = [heat(f, tau, out) for tau in taus]
    tilts = [q * z for z in zs] + [np.zeros(n)]
    window, _ = _window(flows[2], pq, opts, tilts=tilts)
    dual = refine_window(window, opts.dual_nodes(n))
    lps = [p_laplace(g, pq, dual, opts.edge_tol) for g in flows]
    c = p / (-q)
    res, budgets, dqs, grads = [], [], [], []
    for z in zs:
        Qt = [log_double_laplace(lp, q, z) for lp in lps]
        dQdt = (Qt[3] - Qt[1]) / (2.0 * dt)
        Qttt = (Qt[4] - 2.0 * Qt[3] + 2.0 * Qt[1] - Qt[0]) / (2.0 * dt ** 3)
        lp = lps[2]
        grad = np.empty(n)
        zterm = 0.0
        for k in range(n):
            e = np.zeros(n)
            e[k] = dz
            Qz = [log_double_laplace(lp, q, z + m * e) for m in (-2, -1, 1, 2)]
            grad[k] = (Qz[2] - Qz[1]) / (2.0 * dz)
            Qzzz = (Qz[3] - 2.0 * Qz[2] + 2.0 * Qz[1] - Qz[0]) / (2.0 * dz ** 3)
            zterm += dz * dz / 6.0 * abs(Qzzz)
        g2 = float(grad @ grad)
        gn = math.sqrt(g2)
        noise = 1e-13 * max(1.0, abs(Qt[2]))
        budget = (dt * dt / 6.0 * abs(Qttt) + noise / dt
                  + c * gn * (zterm + n * noise / dz) + 0.5 * c * (zterm + n * noise / dz) ** 2)
        res.append(dQdt + 0.5 * c * g2)
        budgets.append(budget)
        dqs.append(dQdt)
        grads.append(gn)
    return HJBReport([z.tolist() for z in zs], res, budgets, dqs, grads, dt, dz)


class HypothesisViolated(ValueError):
    """Neither centering condition of the hypercontractive bound holds."""


@dataclass(frozen=True)
class HypercontractReport:
    lhs_log: float
    rhs_log: float
    margin: float
    s: float
    centering: tuple


def _gauss_bary(f, r):
    terms = r * f.logv + log_gaussian_density(f)
    mass = log_integrand_report(f.spec, terms).log_value
    return np.array([
        float(np.sum(np.exp(terms - mass + f.spec.log_weights()) * x)) for x in f.mesh()
    ])


def hypercontract_check(f, p, p1=None, p2=None, out=None, center_tol=1e-6):
    """``log ||U_s f||_{p2, gamma} - log ||f||_{p1, gamma}`` with ``1 - p = e^{-2s}``.

    Either ``int x f^p dgamma = 0`` or ``int x (U_s f)^q dgamma = 0`` must hold
    to ``center_tol``; otherwise :class:`HypothesisViolated` is raised and no
    norm is computed.
    """
    pq = ExponentPair.from_p(p)
    if pq.is_polar:
        raise ParameterError("p must lie in (0,1)")
    p, q = pq.p, pq.q
    p1 = p if p1 is None else float(p1)
    p2 = q if p2 is None else float(p2)
    if not (p1 <= p and p2 >= q):
        raise ParameterError("need p1 <= p and p2 >= q")
    s = -0.5 * math.log1p(-p)
    out = ou_window(f, s) if out is None else out
    u = ou(f, s, out)
    c1 = float(np.linalg.norm(_gauss_bary(f, p)))
    c2 = float(np.linalg.norm(_gauss_bary(u, q)))
    if min(c1, c2) > center_tol:
        raise HypothesisViolated(f"centering fails: {c1:.3e}, {c2:.3e}")
    lhs = lp_norm_report(u, p2, GAUSSIAN)
    rhs = lp_norm_report(f, p1, GAUSSIAN)
    return HypercontractReport(lhs.log_norm, rhs.log_norm, lhs.log_norm - rhs.log_norm, s, (c1, c2))


@dataclass
class SantaloCurve:
    times: list
    points: list
    objective_log: list
    monotone: bool
    slack: float


class PreconditionFailed(ValueError):
    """The curve needs an attained Santalo point at the start."""


def santalo_curve(f, pq, times, ode_step, clock=FlowKind.FokkerPlanck, opts=None, slack=1e-5):
    """Integrate ``s'(t) = (p/2) bar(Lp(tau_s f_t))`` by the explicit midpoint rule.

    Starts from the Santalo point of ``f`` and records ``s`` and
    ``log int Lp(tau_s f_t)`` at each requested time. Whether the objective is
    monotone is reported, not enforced.
    """
    pq = _as_pair(pq)
    if pq.is_polar:
        raise ParameterError("the curve needs p > 0")
    opts = opts or ProductOptions()
    times = [float(t) for t in times]
    if not times or times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ParameterError("times must start at 0 and be strictly increasing")
    if not ode_step > 0:
        raise ParameterError("ode_step must be positive")
    rep = mp_product(f, pq, opts)
    if rep.santalo is None or rep.santalo.kind is not OutcomeKind.Attained:
        raise PreconditionFailed(
            "support test puts the origin outside the interior of the transform support "
            "(InfimumZero at t=0); the curve has no starting point")
    q, p = pq.q, pq.p
    cache = {}

    def state(t):
        if t not in cache:
            ft = evolve(f, clock, t)
            window, _ = _window(ft, pq, opts, tilts=[np.zeros(f.dim)])
            lp = p_laplace(ft, pq, refine_window(window, opts.dual_nodes(f.dim)), opts.edge_tol)
            cache.clear()
            cache[t] = (ft, lp)
        return cache[t]

    def rhs(t, s):
        ft, lp = state(t)
        for k, ax in enumerate(ft.axes()):
            if not ax[0] <= s[k] <= ax[-1]:
                raise ParameterError(f"curve left the window at t={t}")
        _, grad, _ = objective_gradient_hessian(lp, q, s)
        return 0.5 * p * (grad / q)

    s = np.array(rep.santalo.point, dtype=np.float64)
    pts = [s.tolist()]
    obj = [log_double_laplace(state(0.0)[1], q, s)]
    t = 0.0
    for target in times[1:]:
        m = max(1, int(math.ceil((target - t) / ode_step - 1e-9)))
        h = (target - t) / m
        for _ in range(m):
            k1 = rhs(t, s)
            k2 = rhs(t + 0.5 * h, s + 0.5 * h * k1)
            s = s + h * k2
            t = t + h
        t = target
        pts.append(s.tolist())
        obj.append(log_double_laplace(state(t)[1], q, s))
    mono = all(b >= a - slack for a, b in zip(obj, obj[1:])) or all(b <= a + slack for a, b in zip(obj, obj[1:]))
    return SantaloCurve(times, pts, obj, mono, slack)


@dataclass
class PLimitTable:
    ps: list
    gap_transform: list
    gap_product: list
    log_Mp: list
    log_M: float
    limit_log_M: float

    def decreasing(self):
        def dec(v):
            return all(b < a for a, b in zip(v, v[1:]))
        return dec(self.gap_transform) and dec(self.gap_product)


def polar_test_grid(f, opts=None, depth=8.0, n=201):
    """Central half of the box where the polar is within ``depth`` nats of its peak."""
    opts = opts or ProductOptions()
    pq = ExponentPair.from_p(0.0)
    window, _ = _window(f, pq, opts)
    spec = refine_window(window, opts.dual_nodes(f.dim, True))
    fsq = essential_polar(f, spec)
    keep = fsq.logv >= np.max(fsq.logv) - depth
    lo, hi = [], []
    for k, ax in enumerate(spec.axes()):
        others = tuple(i for i in range(f.dim) if i != k)
        proj = keep.any(axis=others) if others else keep
        idx = np.flatnonzero(proj)
        a, b = ax[idx[0]], ax[idx[-1]]
        mid, half = 0.5 * (a + b), 0.25 * (b - a)
        lo.append(mid - half)
        hi.append(mid + half)
    return GridSpec(tuple(lo), tuple(hi), (n,) * f.dim)


def p_limit_sweep(f, ps, test_grid=None, opts=None):
    """Gaps between ``Lp(f)(x/p)`` and the polar, and between ``M_p`` and ``M``.

    The transform gap is the largest log difference over ``test_grid``. The
    product column compares ``log M_p(f)`` with ``log M(f)``. ``limit_log_M``
    extrapolates ``log M_p`` to ``p = 0`` by least squares in
    ``1, p log p, p, p^2``.
    """
    opts = opts or ProductOptions()
    ps = [float(p) for p in ps]
    if any(b >= a for a, b in zip(ps, ps[1:])):
        raise ParameterError("ps must be strictly decreasing")
    test = polar_test_grid(f, opts) if test_grid is None else test_grid
    fsq = essential_polar(f, test)
    vol = volume_product(f, opts)
    gaps_t, gaps_m, logs = [], [], []
    for p in ps:
        pq = ExponentPair.from_p(p)
        scaled = GridSpec(tuple(a / p for a in test.lo), tuple(b / p for b in test.hi), test.n)
        lp = p_laplace(f, pq, scaled, opts.edge_tol)
        both = np.isfinite(lp.logv) & np.isfinite(fsq.logv)
        if (np.isfinite(lp.logv) != np.isfinite(fsq.logv)).any():
            gaps_t.append(math.inf)
        else:
            gaps_t.append(float(np.max(np.abs(lp.logv[both] - fsq.logv[both]))))
        rep = mp_product(f, pq, opts)
        logs.append(rep.log_Mp)
        gaps_m.append(abs(rep.log_Mp - vol.log_Mp))
    P = np.array(ps)
    if len(ps) >= 4:
        X = np.stack([np.ones_like(P), P * np.log(P), P, P * P], axis=1)
        coef, *_ = np.linalg.lstsq(X, np.array(logs), rcond=None)
        limit = float(coef[0])
    else:
        limit = math.nan
    return PLimitTable(ps, gaps_t, gaps_m, logs, vol.log_Mp, limit)

"""Minimization of the double-Laplace objective and the Santalo point.

For a log-transform ``lp`` on a dual grid the objective is

    G(z) = log sum_x w(x) exp(lp(x) + q z . x),

a convex function whose gradient is ``q`` times the mean of the tilted
probability ``mu_z`` and whose Hessian is ``q^2`` times its covariance.
"""

from dataclasses import dataclass, field
import enum
import math

import numpy as np

from .gridfn import GridFunction, ParameterError, log_moments, logsumexp


class OutcomeKind(enum.Enum):
    InfimumZero = "InfimumZero"
    Attained = "Attained"


class Dichotomy(enum.Enum):
    OriginInterior = "OriginInterior"
    OriginNotInterior = "OriginNotInterior"


class NonConverged(RuntimeError):
    """Neither a minimizer nor an escape ray was found within the budget."""


class ConfigurationError(ValueError):
    """The dual grid cannot answer the question asked of it."""


class DichotomyMismatch(RuntimeError):
    """The solver verdict disagrees with the support test."""


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: float = 1e-8
    max_iter: int = 100
    escape_radius: float | None = None
    shrink: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        for name in ("grad_tol", "max_iter", "shrink", "armijo"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.escape_radius is not None and not self.escape_radius > 0:
            raise ParameterError("escape_radius must be positive")
        if not self.shrink < 1:
            raise ParameterError("shrink must be below 1")


@dataclass(frozen=True)
class SantaloOutcome:
    kind: OutcomeKind
    point: np.ndarray | None
    log_inf: float
    bary_residual: float
    iterations: int
    escape_ray: np.ndarray | None = None
    certified: bool = True
    notes: tuple = field(default=())

    def to_record(self):
        return {
            "kind": self.kind.value,
            "point": None if self.point is None else [float(v) for v in self.point],
            "log_inf": float(self.log_inf),
            "bary_residual": float(self.bary_residual),
            "iterations": int(self.iterations),
        }


def _check_lp(lp):
    if not lp.is_nonzero():
        raise ParameterError("transform is zero on the whole dual grid")


def _coords(lp):
    return lp.axes()


def log_double_laplace(lp, q, z):
    """``log sum_x w(x) exp(lp(x) + q z . x)`` over the dual nodes."""
    _check_lp(lp)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    mesh = lp.mesh()
    tilt = sum(q * zk * xk for zk, xk in zip(z, mesh))
    return logsumexp(lp.logv + tilt + lp.spec.log_weights())


def objective_gradient_hessian(lp, q, z):
    """``G(z)``, ``q * mean(mu_z)`` and ``q^2 * cov(mu_z)``."""
    _check_lp(lp)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    mesh = lp.mesh()
    tilt = sum(q * zk * xk for zk, xk in zip(z, mesh))
    total, mean, cov = log_moments(lp.spec, lp.logv + tilt, _coords(lp))
    return total, q * mean, q * q * cov


def _tilted_edge_share(lp, q, z):
    mesh = lp.mesh()
    tilt = sum(q * zk * xk for zk, xk in zip(z, mesh))
    terms = lp.logv + tilt + lp.spec.log_weights()
    total = logsumexp(terms)
    return logsumexp(terms[lp.spec.edge_mask()]) - total


def _newton_direction(g, H, scale):
    w = np.linalg.eigvalsh(H)
    if np.all(np.isfinite(w)) and w[0] > 1e-14 * max(1.0, w[-1]) and w[-1] / w[0] <= 1e12:
        d = -np.linalg.solve(H, g)
        if np.all(np.isfinite(d)) and d @ g < 0:
            return d, True
    # degenerate curvature: normalized descent step
    return -g * (scale / float(np.linalg.norm(g))), False


def _escaped(z, best, it):
    ray = z / np.linalg.norm(z) if np.linalg.norm(z) > 0 else None
    return SantaloOutcome(OutcomeKind.InfimumZero, None, best, math.nan, it,
                          escape_ray=ray, certified=False)


def _minimize(lp, q, opts, z0=None):
    _check_lp(lp)
    dim = lp.dim
    radius = opts.escape_radius
    if radius is None:
        radius = 10.0 * max(max(abs(ax[0]), abs(ax[-1])) for ax in lp.axes())
    z = np.zeros(dim) if z0 is None else np.atleast_1d(np.asarray(z0, dtype=np.float64)).copy()
    G, g, H = objective_gradient_hessian(lp, q, z)
    best = G
    for it in range(opts.max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= opts.grad_tol * max(1.0, abs(G)):
            return SantaloOutcome(OutcomeKind.Attained, z, G, gnorm / abs(q), it)
        if it == opts.max_iter:
            break
        d, newton = _newton_direction(g, H, max(1.0, float(np.linalg.norm(z))))
        dn = float(np.linalg.norm(d))
        if dn > radius:
            d = d * (radius / dn)
        slope = float(g @ d)
        alpha = 1.0
        accepted = False
        while alpha > 1e-20:
            zt = z + alpha * d
            Gt = log_double_laplace(lp, q, zt)
            if Gt <= G + opts.armijo * alpha * slope:
                accepted = True
                break
            alpha *= opts.shrink
        if not accepted:
            if not newton and best < log_double_laplace(lp, q, np.zeros(dim)):
                # the tilted mass has collapsed onto the support boundary
                return _escaped(z, best, it)
            if -slope <= 1e-14 * max(1.0, abs(G)):
                return SantaloOutcome(OutcomeKind.Attained, z, G, gnorm / abs(q), it,
                                      notes=("line search stalled at round-off",))
            raise NonConverged(f"line search failed at iteration {it}, |grad| = {gnorm:.3e}")
        z = zt
        best = min(best, Gt)
        if np.linalg.norm(z) > radius:
            if Gt < G:
                return _escaped(z, best, it + 1)
            raise NonConverged("iterate left the escape radius without decrease")
        G, g, H = objective_gradient_hessian(lp, q, z)
    raise NonConverged(f"no verdict after {opts.max_iter} iterations")


def santalo_point(lp, pq, opts=None, z0=None):
    """Minimize ``z -> log int Lp(tau_z f)`` given ``lp = log Lp f``.

    Damped Newton from ``z0`` (default 0) with Armijo backtracking. The
    outcome is either ``Attained`` with the minimizer and the barycenter
    residual, or ``InfimumZero`` with the escape direction when the iterates
    leave the escape radius while the objective keeps decreasing.
    """
    if pq.is_polar:
        raise ParameterError("use santalo_point_polar for p = 0")
    return _minimize(lp, pq.q, opts or SolverOptions(), z0)


def santalo_point_polar(fsq, opts=None, z0=None):
    """Same as :func:`santalo_point` for the polar, i.e. with ``q = -1``."""
    return _minimize(fsq, -1.0, opts or SolverOptions(), z0)


def support_dichotomy(lp, tol=1e-12):
    """Whether the origin is interior to the support of ``exp(lp)``.

    The origin counts as interior when every node of the box of radius three
    cells around it carries a value above ``tol`` times the maximum.
    """
    _check_lp(lp)
    axes = lp.axes()
    sel = []
    for k, ax in enumerate(axes):
        h = lp.spec.h[k]
        if not (ax[0] <= 0.0 <= ax[-1]):
            raise ConfigurationError("the origin lies outside the dual grid")
        idx = np.flatnonzero(np.abs(ax) <= 3.0 * h * (1 + 1e-9))
        if idx.size == 0 or idx[0] == 0 and ax[0] > -3.0 * h * (1 - 1e-9) \
                or idx[-1] == len(ax) - 1 and ax[-1] < 3.0 * h * (1 - 1e-9):
            raise ConfigurationError("the dual grid does not surround the origin by three cells")
        sel.append(slice(idx[0], idx[-1] + 1))
    block = lp.logv[tuple(sel)]
    thresh = np.max(lp.logv) + math.log(tol)
    if np.all(block > thresh):
        return Dichotomy.OriginInterior
    return Dichotomy.OriginNotInterior


def tilted_edge_share(lp, q, z):
    """Log share of the tilted mass carried by the boundary of the dual grid."""
    return _tilted_edge_share(lp, q, np.atleast_1d(np.asarray(z, dtype=np.float64)))

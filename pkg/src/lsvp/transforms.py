"""Laplace and p-Laplace transforms, the essential polar, and dual grids.

All transforms factor over axes: the kernel ``exp(x . y)`` and the max-plus
kernel ``x . y - psi(y)`` are both applied one axis at a time, so a 2D grid of
``N x N`` nodes costs ``O(N^3)`` instead of ``O(N^4)``.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from . import _backend
from .gridfn import (
    LOG_TAIL_TOL, TAIL_TOL, GridFunction, GridSpec, ParameterError, logsumexp,
)


class TransformOfZero(ValueError):
    """The Laplace transform of the zero function was requested."""


class DegenerateDualGrid(ValueError):
    """The heuristic dual window does not meet the allowed window."""


class InfiniteTransform:
    """Marker for the p-Laplace transform of the zero function, which is +inf."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "LP_INFINITY"


LP_INFINITY = InfiniteTransform()


def _apply_axis(arr, axis, fn):
    moved = np.moveaxis(arr, axis, -1)
    lead = moved.shape[:-1]
    res = fn(np.ascontiguousarray(moved.reshape(-1, moved.shape[-1])))
    res = res.reshape(lead + (res.shape[-1],))
    return np.moveaxis(res, -1, axis)


def _laplace_log(f, dual, power=1.0):
    """Per dual node: log of the quadrature sum and of its boundary-layer part."""
    if not f.is_nonzero():
        raise TransformOfZero("Laplace transform of the zero function")
    with np.errstate(invalid="ignore"):
        a = np.where(f.logv == -np.inf, -np.inf, power * f.logv)
    total = a + f.spec.log_weights()
    edge = None
    src = f.axes()
    dst = dual.axes()
    for k in reversed(range(f.dim)):
        y = np.ascontiguousarray(src[k])
        x = np.ascontiguousarray(dst[k])
        ends = [0, len(y) - 1]
        y_ends = np.ascontiguousarray(y[ends])

        def ends_fn(m, x=x, y_ends=y_ends, ends=ends):
            return _backend.lse_affine(np.ascontiguousarray(m[:, ends]), x, y_ends)

        def full_fn(m, x=x, y=y):
            return _backend.lse_affine(m, x, y)

        new_edge = _apply_axis(total, k, ends_fn)
        if edge is not None:
            new_edge = np.logaddexp(new_edge, _apply_axis(edge, k, full_fn))
        total = _apply_axis(total, k, full_fn)
        edge = new_edge
    return total, edge


def laplace(f, dual):
    """Log of ``Lf(x) = int f(y) exp(x . y) dy`` on the nodes of ``dual``."""
    total, _ = _laplace_log(f, dual)
    return GridFunction(dual, total)


def laplace_report(f, dual):
    """Log Laplace transform together with the boundary-layer log share."""
    total, edge = _laplace_log(f, dual)
    return GridFunction(dual, total), edge - total


@dataclass(frozen=True)
class PLaplaceResult:
    transform: GridFunction
    masked: int


def p_laplace_report(f, pq, dual, edge_tol=TAIL_TOL):
    """p-Laplace transform plus the number of nodes cut by the edge rule.

    A dual node whose Laplace integral draws more than ``edge_tol`` of its
    mass from the boundary layer of the source grid cannot be certified
    finite; its transform value is set to zero there.
    """
    if pq.is_polar:
        raise ParameterError("p-Laplace transform needs p > 0")
    if not f.is_nonzero():
        return LP_INFINITY
    total, edge = _laplace_log(f, dual, power=1.0 / pq.p)
    logv = pq.q * total
    masked = 0
    if edge_tol is not None:
        cut = (edge - total) > math.log(edge_tol)
        masked = int(cut.sum())
        logv = np.where(cut, -np.inf, logv)
    return PLaplaceResult(GridFunction(dual, logv), masked)


def p_laplace(f, pq, dual, edge_tol=TAIL_TOL):
    """``(L(f^(1/p)))^q`` in log form, or ``LP_INFINITY`` when ``f`` is zero."""
    res = p_laplace_report(f, pq, dual, edge_tol)
    if res is LP_INFINITY:
        return res
    return res.transform


def _vertex_refine(psi, x, h, out, arg, rel=0.1):
    """Parabolic correction of a discrete supremum where psi is locally quadratic.

    Around the maximizing node the three values of ``x y - psi`` are replaced
    by their interpolating parabola, but only where the second differences of
    ``psi`` at the node and both neighbours are positive and agree to ``rel``.
    Kinks, jumps and the boundary are left alone.
    """
    n = psi.shape[1]
    if n < 5:
        return out
    jc = np.clip(arg, 2, n - 3)
    rows = np.arange(psi.shape[0])[:, None]
    P = [psi[rows, jc + d] for d in (-2, -1, 0, 1, 2)]
    with np.errstate(invalid="ignore", divide="ignore"):
        d0 = P[1] - 2.0 * P[2] + P[3]
        dm = P[0] - 2.0 * P[1] + P[2]
        dp = P[2] - 2.0 * P[3] + P[4]
        ok = (arg == jc) & (d0 > 0) & (np.abs(dm - d0) <= rel * d0) & (np.abs(dp - d0) <= rel * d0)
        for v in P:
            ok &= np.isfinite(v)
        diff = P[3] - P[1] - 2.0 * h * x[None, :]
        corr = diff * diff / (8.0 * d0)
    return np.where(ok, out + corr, out)


def _legendre(psi, src_axes, dual, refine=False):
    cur = psi
    dst = dual.axes()
    for k in reversed(range(len(src_axes))):
        y = np.ascontiguousarray(src_axes[k])
        x = np.ascontiguousarray(dst[k])
        h = float(y[1] - y[0]) if len(y) > 1 else 0.0

        def fn(m, x=x, y=y, h=h):
            if not refine:
                return _backend.legendre_rows(m, y, x)
            out, arg = _backend.legendre_rows_arg(m, y, x)
            return _vertex_refine(m, x, h, out, arg)

        cur = -_apply_axis(cur, k, fn)
    return -cur


def legendre(f, dual, edge_rule=False, refine=False):
    """Discrete Legendre transform of ``psi = -log f`` on the ``dual`` nodes.

    With ``edge_rule`` the value is ``+inf`` wherever the supremum is attained
    only on the boundary of the source grid. ``refine`` applies a parabolic
    vertex correction where ``psi`` is locally quadratic; the edge rule is
    always decided on the plain discrete supremum.
    """
    psi = np.where(f.logv == -np.inf, np.inf, -f.logv)
    star = _legendre(psi, f.axes(), dual)
    if edge_rule:
        inner = np.where(f.spec.edge_mask(), np.inf, psi)
        star_in = _legendre(inner, f.axes(), dual)
        cut = star > star_in
    if refine:
        star = _legendre(psi, f.axes(), dual, refine=True)
    if edge_rule:
        star = np.where(cut, np.inf, star)
    return star


def essential_polar(f, dual, edge_rule=True, refine=False):
    """``f^polar = exp(-psi*)`` with ``psi = -log f``, on the ``dual`` nodes."""
    if not f.is_nonzero():
        raise TransformOfZero("polar of the zero function")
    star = legendre(f, dual, edge_rule=edge_rule, refine=refine)
    return GridFunction(dual, np.where(star == np.inf, -np.inf, -star))


def legendre_bruteforce(f, dual):
    """Direct ``O(N M)`` supremum, used as an oracle."""
    psi = np.where(f.logv == -np.inf, np.inf, -f.logv).ravel()
    keep = np.isfinite(psi)
    ys = np.stack([m.ravel() for m in f.mesh()], axis=1)[keep]
    xs = np.stack([m.ravel() for m in np.meshgrid(*dual.axes(), indexing="ij")], axis=1)
    out = np.full(xs.shape[0], -np.inf)
    for i in range(xs.shape[0]):
        if keep.any():
            out[i] = np.max(ys @ xs[i] - psi[keep])
    return out.reshape(dual.shape)


class Provenance(enum.Enum):
    UserGiven = "UserGiven"
    SupportHeuristic = "SupportHeuristic"


@dataclass(frozen=True)
class DualGridChoice:
    spec: GridSpec
    provenance: Provenance
    containment_report: tuple

    @classmethod
    def user(cls, spec):
        return cls(spec, Provenance.UserGiven, tuple(zip(spec.lo, spec.hi)))


def support_box(f):
    """Per-axis ``(min, max)`` of node coordinates where ``f > 0``."""
    finite = np.isfinite(f.logv)
    if not finite.any():
        raise TransformOfZero("support of the zero function")
    out = []
    for k, ax in enumerate(f.axes()):
        others = tuple(i for i in range(f.dim) if i != k)
        proj = finite.any(axis=others) if others else finite
        idx = np.flatnonzero(proj)
        out.append((float(ax[idx[0]]), float(ax[idx[-1]])))
    return out


def dual_grid_heuristic(f, pq, max_window, pad_factor=0.25, min_nodes=129):
    """Dual window from the support of ``f`` scaled by ``-q``.

    The scaled support interval is reported, padded by ``pad_factor`` of its
    width on each side, and clipped to ``max_window``. The node spacing is
    never coarser than that of ``max_window`` and each axis has at least
    ``min_nodes`` nodes.
    """
    scale = 1.0 if pq.is_polar else -pq.q
    report, lo, hi, n = [], [], [], []
    for k, (smin, smax) in enumerate(support_box(f)):
        a, b = scale * smin, scale * smax
        report.append((a, b))
        width = b - a
        if width <= 0.0:
            width = scale * f.spec.h[k]
        lo_k = max(a - pad_factor * width, max_window.lo[k])
        hi_k = min(b + pad_factor * width, max_window.hi[k])
        if not hi_k > lo_k:
            raise DegenerateDualGrid(f"axis {k}: scaled support misses the allowed window")
        if lo_k == max_window.lo[k] and hi_k == max_window.hi[k]:
            nk = max(max_window.n[k], min_nodes)
        else:
            nk = max(min_nodes, int(math.ceil((hi_k - lo_k) / max_window.h[k])) + 1)
        lo.append(lo_k)
        hi.append(hi_k)
        n.append(nk)
    spec = GridSpec(tuple(lo), tuple(hi), tuple(n))
    return DualGridChoice(spec, Provenance.SupportHeuristic, tuple(report))


def fit_window(build, start, cap, n_coarse, depth=60.0, tilts=None, max_rounds=40):
    """Smallest box holding the ``depth``-nat superlevel set of a log-concave map.

    ``build(spec)`` returns log-values on a grid. The box starts at ``start``,
    grows towards ``cap`` while the superlevel set touches a side, and then
    shrinks onto the set with two coarse cells of margin. ``tilts`` lists
    linear terms ``c . x`` added before thresholding; the union over all tilts
    is kept.
    """
    dim = start.dim
    lo = np.array(start.lo, dtype=float)
    hi = np.array(start.hi, dtype=float)
    clo = np.array(cap.lo, dtype=float)
    chi = np.array(cap.hi, dtype=float)
    lo = np.maximum(lo, clo)
    hi = np.minimum(hi, chi)
    tilts = [np.zeros(dim)] if tilts is None else [np.atleast_1d(np.asarray(c, float)) for c in tilts]
    for _ in range(max_rounds):
        spec = GridSpec(tuple(lo), tuple(hi), (n_coarse,) * dim)
        vals = build(spec)
        mesh = np.meshgrid(*spec.axes(), indexing="ij")
        keep = np.zeros(spec.shape, dtype=bool)
        for c in tilts:
            w = vals + sum(ck * xk for ck, xk in zip(c, mesh))
            top = np.max(w)
            if top == -np.inf:
                continue
            keep |= w >= top - depth
        if not keep.any():
            return spec
        grew = False
        new_lo, new_hi = lo.copy(), hi.copy()
        for k in range(dim):
            others = tuple(i for i in range(dim) if i != k)
            proj = keep.any(axis=others) if others else keep
            idx = np.flatnonzero(proj)
            width = hi[k] - lo[k]
            ax = spec.axes()[k]
            hk = spec.h[k]
            if idx[0] == 0 and lo[k] > clo[k]:
                new_lo[k] = max(clo[k], lo[k] - 2.0 * width)
                grew = True
            else:
                new_lo[k] = max(lo[k], ax[idx[0]] - 2.0 * hk)
            if idx[-1] == n_coarse - 1 and hi[k] < chi[k]:
                new_hi[k] = min(chi[k], hi[k] + 2.0 * width)
                grew = True
            else:
                new_hi[k] = min(hi[k], ax[idx[-1]] + 2.0 * hk)
        if grew:
            lo, hi = new_lo, new_hi
            continue
        shrink = np.max((new_hi - new_lo) / (hi - lo))
        lo, hi = new_lo, new_hi
        if shrink > 0.5:
            return GridSpec(tuple(lo), tuple(hi), (n_coarse,) * dim)
    return GridSpec(tuple(lo), tuple(hi), (n_coarse,) * dim)


def refine_window(window, n, include_origin=True, margin_cells=6):
    """Fine grid on ``window`` with ``n`` nodes per axis, widened to hold 0."""
    lo = list(window.lo)
    hi = list(window.hi)
    if include_origin:
        for k in range(len(lo)):
            h = (hi[k] - lo[k]) / (n - 1)
            for _ in range(200):
                if lo[k] > -margin_cells * h:
                    lo[k] = -margin_cells * h
                if hi[k] < margin_cells * h:
                    hi[k] = margin_cells * h
                h = (hi[k] - lo[k]) / (n - 1)
    return GridSpec(tuple(lo), tuple(hi), (n,) * len(lo))

"""Log-domain grid functions.

A nonnegative function on a rectangular grid is stored through its log-values,
with ``-inf`` standing for a zero. Integrals use the trapezoidal product rule
evaluated with a shifted-exponent sum, so nothing overflows even when the
underlying values span hundreds of orders of magnitude.
"""

from dataclasses import dataclass, field
import math

import numpy as np

TAIL_TOL = 1e-8
LOG_TAIL_TOL = math.log(TAIL_TOL)


class ParameterError(ValueError):
    """An argument lies outside the documented domain."""


class UndefinedBarycenter(ValueError):
    """Barycenter of the zero function."""


def logsumexp(a, axis=None):
    """Stable ``log(sum(exp(a)))``; all ``-inf`` input gives ``-inf``.

    The sum after shifting is numpy's pairwise reduction, which has a fixed
    order for a given shape.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return -np.inf if axis is None else np.full(np.delete(a.shape, axis), -np.inf)
    top = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True))
    out = np.where(top == -np.inf, -np.inf, safe + s)
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid: per-axis bounds and node counts."""

    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(lo) == len(hi) == len(n)) or len(lo) == 0:
            raise ParameterError("lo, hi and n must have the same positive length")
        for a, b, k in zip(lo, hi, n):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ParameterError("grid bounds must be finite")
            if not b > a:
                raise ParameterError("upper bound must exceed lower bound on every axis")
            if k < 2:
                raise ParameterError("every axis needs at least two nodes")
            if not (b - a) / (k - 1) > 0.0:
                raise ParameterError("node spacing must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def box(cls, lo, hi, n, dim=1):
        """Same bounds and node count on every axis."""
        return cls((lo,) * dim, (hi,) * dim, (n,) * dim)

    @property
    def dim(self):
        return len(self.n)

    @property
    def shape(self):
        return self.n

    @property
    def h(self):
        return tuple((b - a) / (k - 1) for a, b, k in zip(self.lo, self.hi, self.n))

    def axes(self):
        return [np.linspace(a, b, k) for a, b, k in zip(self.lo, self.hi, self.n)]

    def log_weights_axes(self):
        """Per-axis log trapezoid weights."""
        out = []
        for h, k in zip(self.h, self.n):
            w = np.full(k, math.log(h))
            w[0] = w[-1] = math.log(h / 2.0)
            out.append(w)
        return out

    def log_weights(self):
        return _outer_sum(self.log_weights_axes())

    def edge_mask(self):
        """True on nodes that sit on the boundary of the box."""
        mask = np.zeros(self.n, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = -1
            mask[tuple(idx)] = True
        return mask

    def radius(self):
        return max(max(abs(a), abs(b)) for a, b in zip(self.lo, self.hi))


def _outer_sum(vectors):
    out = np.asarray(vectors[0], dtype=np.float64)
    for v in vectors[1:]:
        out = out[..., None] + np.asarray(v)[(None,) * out.ndim]
    return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a nonnegative function, stored as log-values.

    Node coordinates are the grid nodes of ``spec`` plus ``origin_shift``, so a
    translation never touches ``logv``.
    """

    spec: GridSpec
    logv: np.ndarray
    origin_shift: tuple = field(default=None)

    def __post_init__(self):
        logv = np.array(self.logv, dtype=np.float64)
        if logv.shape != self.spec.shape:
            raise ParameterError(f"logv shape {logv.shape} does not match grid {self.spec.shape}")
        if np.isnan(logv).any():
            raise ParameterError("logv contains NaN")
        if (logv == np.inf).any():
            raise ParameterError("logv contains +inf")
        logv.setflags(write=False)
        shift = self.origin_shift
        if shift is None:
            shift = (0.0,) * self.spec.dim
        shift = tuple(float(v) for v in np.atleast_1d(shift))
        if len(shift) != self.spec.dim:
            raise ParameterError("origin_shift length must equal the grid dimension")
        object.__setattr__(self, "logv", logv)
        object.__setattr__(self, "origin_shift", shift)

    @property
    def dim(self):
        return self.spec.dim

    def is_nonzero(self):
        return bool(np.isfinite(self.logv).any())

    def axes(self):
        return [ax + s for ax, s in zip(self.spec.axes(), self.origin_shift)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def with_logv(self, logv):
        return GridFunction(self.spec, logv, self.origin_shift)

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (self.spec == other.spec and self.origin_shift == other.origin_shift
                and np.array_equal(self.logv, other.logv))

    __hash__ = None


@dataclass(frozen=True)
class ExponentPair:
    """Conjugate exponents with ``1/p + 1/q = 1``; ``p = 0`` marks the polar limit."""

    p: float
    q: float | None

    @classmethod
    def from_p(cls, p):
        p = float(p)
        if not (0.0 <= p < 1.0) or not math.isfinite(p):
            raise ParameterError("p must lie in [0,1)")
        if p == 0.0:
            return cls(0.0, None)
        return cls(p, p / (p - 1.0))

    @property
    def is_polar(self):
        return self.p == 0.0


def sample(spec, log_fn, shift=None):
    """Build a grid function from a callable returning log-values on the mesh."""
    shift = (0.0,) * spec.dim if shift is None else shift
    coords = np.meshgrid(*[ax + s for ax, s in zip(spec.axes(), shift)], indexing="ij")
    with np.errstate(divide="ignore"):
        logv = np.asarray(log_fn(*coords), dtype=np.float64)
    return GridFunction(spec, np.broadcast_to(logv, spec.shape), shift)


def gaussian(spec, sigma, center=None, amplitude=1.0):
    """Samples of ``amplitude * exp(-|x - center|^2 / (2 sigma))``."""
    if not (sigma > 0.0) or not math.isfinite(sigma):
        raise ParameterError("sigma must be positive")
    if not (amplitude > 0.0) or not math.isfinite(amplitude):
        raise ParameterError("amplitude must be positive")
    center = np.zeros(spec.dim) if center is None else np.atleast_1d(np.asarray(center, float))
    if center.shape != (spec.dim,) or not np.isfinite(center).all():
        raise ParameterError("center must be a finite vector of the grid dimension")
    loga = math.log(amplitude)

    def log_fn(*xs):
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        return loga - r2 / (2.0 * sigma)

    return sample(spec, log_fn)


def indicator(spec, lo, hi):
    """Samples of the indicator of the closed box ``[lo, hi]``."""
    lo = np.broadcast_to(np.asarray(lo, float), (spec.dim,))
    hi = np.broadcast_to(np.asarray(hi, float), (spec.dim,))

    def log_fn(*xs):
        inside = np.ones(np.shape(xs[0]), dtype=bool)
        for x, a, b in zip(xs, lo, hi):
            inside &= (x >= a) & (x <= b)
        return np.where(inside, 0.0, -np.inf)

    return sample(spec, log_fn)


@dataclass(frozen=True)
class IntegralReport:
    log_value: float
    log_edge_ratio: float

    @property
    def tail_suspect(self):
        return self.log_edge_ratio > LOG_TAIL_TOL


def log_integrand_report(spec, log_integrand):
    """Trapezoid integral of ``exp(log_integrand)`` and its boundary-layer share."""
    terms = log_integrand + spec.log_weights()
    total = logsumexp(terms)
    if total == -np.inf:
        return IntegralReport(-np.inf, -np.inf)
    edge = logsumexp(terms[spec.edge_mask()])
    return IntegralReport(total, edge - total)


def integral_report(f):
    return log_integrand_report(f.spec, f.logv)


def integrate_log(f):
    """``log`` of the trapezoid approximation of the integral of ``f``."""
    return integral_report(f).log_value


def tail_suspect(f):
    return integral_report(f).tail_suspect


def log_moments(spec, logmass, coords):
    """Mass, mean and covariance of ``exp(logmass)`` against trapezoid weights.

    ``coords`` are the per-axis node coordinates. Means and second moments are
    accumulated with sign-split log sums.
    """
    terms = logmass + spec.log_weights()
    total = logsumexp(terms)
    if total == -np.inf:
        raise UndefinedBarycenter("barycenter of the zero function is undefined")
    prob = np.exp(terms - total)
    mesh = np.meshgrid(*coords, indexing="ij")
    dim = spec.dim
    mean = np.empty(dim)
    for k in range(dim):
        mean[k] = _signed_mean(terms, total, mesh[k])
    cov = np.empty((dim, dim))
    for a in range(dim):
        da = mesh[a] - mean[a]
        for b in range(a, dim):
            db = mesh[b] - mean[b]
            cov[a, b] = cov[b, a] = float(np.sum(prob * da * db))
    return total, mean, cov


def _signed_mean(terms, total, x):
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(x))
    pos = logsumexp(np.where(x > 0, terms + lx, -np.inf))
    neg = logsumexp(np.where(x < 0, terms + lx, -np.inf))
    return math.exp(pos - total) - math.exp(neg - total)


def barycenter(f):
    """Mass-normalized first moment of ``f``.

    Computed in grid coordinates and then offset by ``origin_shift``, so a
    translation moves the result by exactly the translation vector.
    """
    terms = f.logv + f.spec.log_weights()
    total = logsumexp(terms)
    if total == -np.inf:
        raise UndefinedBarycenter("barycenter of the zero function is undefined")
    mesh = np.meshgrid(*f.spec.axes(), indexing="ij")
    local = np.array([_signed_mean(terms, total, mesh[k]) for k in range(f.dim)])
    return local + np.asarray(f.origin_shift)


def translate(f, z):
    """``x -> f(x - z)``: only the origin shift changes."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if z.shape != (f.dim,):
        raise ParameterError("translation vector has the wrong dimension")
    shift = tuple(float(a + b) for a, b in zip(f.origin_shift, z))
    return GridFunction(f.spec, f.logv, shift)


@dataclass(frozen=True)
class GaussianWeight:
    """The standard Gaussian probability measure."""


GAUSSIAN = GaussianWeight()


def log_gaussian_density(f):
    mesh = f.mesh()
    r2 = sum(x * x for x in mesh)
    return -0.5 * r2 - 0.5 * f.dim * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NormReport:
    log_norm: float
    tail_suspect: bool
    diverged: bool


def lp_norm_report(f, r, weight=None):
    """``(1/r) log int f^r dmu`` with divergence and truncation diagnostics."""
    r = float(r)
    if r == 0.0 or not math.isfinite(r):
        raise ParameterError("exponent must be a nonzero real")
    if not f.is_nonzero():
        if r > 0:
            return NormReport(-np.inf, False, False)
        return NormReport(-np.inf, False, True)
    if r < 0 and (f.logv == -np.inf).any():
        return NormReport(-np.inf, False, True)
    integrand = r * f.logv
    if weight is not None:
        if not isinstance(weight, GaussianWeight):
            raise ParameterError("weight must be None or a GaussianWeight")
        integrand = integrand + log_gaussian_density(f)
    rep = log_integrand_report(f.spec, integrand)
    if rep.tail_suspect and r < 0:
        return NormReport(-np.inf, True, True)
    return NormReport(rep.log_value / r, rep.tail_suspect, False)


def lp_norm_log(f, r, weight=None):
    """Log of the L^r norm of ``f``, Lebesgue or Gaussian weighted.

    For ``r < 0`` a zero of ``f`` or a non-decaying integrand means the
    integral of ``f^r`` diverges; the norm is then reported as ``-inf``.
    """
    return lp_norm_report(f, r, weight).log_norm


def interp_log(f, points):
    """Multilinear interpolation of ``logv`` at ``points`` of shape ``(..., dim)``.

    Points outside the grid, or touching a zero node with positive weight,
    get ``-inf``.
    """
    pts = np.asarray(points, dtype=np.float64)
    dim = f.dim
    if pts.shape[-1] != dim:
        raise ParameterError("points have the wrong dimension")
    flat = pts.reshape(-1, dim)
    idx0 = []
    frac = []
    ok = np.ones(flat.shape[0], dtype=bool)
    for k in range(dim):
        t = (flat[:, k] - f.origin_shift[k] - f.spec.lo[k]) / f.spec.h[k]
        nk = f.spec.n[k]
        ok &= (t >= -1e-9) & (t <= nk - 1 + 1e-9)
        t = np.clip(t, 0.0, nk - 1)
        i0 = np.minimum(np.floor(t).astype(np.int64), nk - 2)
        idx0.append(i0)
        frac.append(t - i0)
    out = np.zeros(flat.shape[0])
    dead = ~ok
    for corner in range(1 << dim):
        w = np.ones(flat.shape[0])
        index = []
        for k in range(dim):
            bit = (corner >> k) & 1
            w = w * (frac[k] if bit else 1.0 - frac[k])
            index.append(idx0[k] + bit)
        vals = f.logv[tuple(index)]
        live = w > 0.0
        dead |= live & (vals == -np.inf)
        out += np.where(live, w * np.where(np.isfinite(vals), vals, 0.0), 0.0)
    out[dead] = -np.inf
    return out.reshape(pts.shape[:-1])


def affine_image(f, lam, A):
    """Samples of ``x -> lam * f(A x)``.

    Diagonal ``A`` rescales the grid itself, so no value is interpolated.
    Any other invertible ``A`` is handled by multilinear interpolation of the
    log-values on the original grid.
    """
    if not (lam > 0.0) or not math.isfinite(lam):
        raise ParameterError("lambda must be positive")
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 0:
        A = np.eye(f.dim) * A
    elif A.ndim == 1:
        A = np.diag(A)
    if A.shape != (f.dim, f.dim) or not np.isfinite(A).all():
        raise ParameterError("A must be a finite square matrix of the grid dimension")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > 1e12:
        raise ParameterError("A is singular")
    loglam = math.log(lam)
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        a = np.diag(A)
        if np.all(a == 1.0):
            return f.with_logv(f.logv + loglam) if loglam != 0.0 else f
        lo, hi, shift = [], [], []
        logv = f.logv
        for k in range(f.dim):
            if a[k] > 0:
                lo.append(f.spec.lo[k] / a[k])
                hi.append(f.spec.hi[k] / a[k])
            else:
                lo.append(f.spec.hi[k] / a[k])
                hi.append(f.spec.lo[k] / a[k])
                logv = np.flip(logv, axis=k)
            shift.append(f.origin_shift[k] / a[k])
        spec = GridSpec(tuple(lo), tuple(hi), f.spec.n)
        return GridFunction(spec, logv + loglam, tuple(shift))
    mesh = np.stack(f.mesh(), axis=-1)
    pts = mesh @ A.T
    return f.with_logv(interp_log(f, pts) + loglam)


def to_text(f):
    """Serialize to the line-oriented ``gridfn v1`` text format."""
    lines = [f"gridfn v1 dim={f.dim}"]
    for a, b, k in zip(f.spec.lo, f.spec.hi, f.spec.n):
        lines.append(f"axis lo={a!r} hi={b!r} n={k}")
    lines.append("shift " + " ".join(repr(s) for s in f.origin_shift))
    lines.extend(repr(float(v)) for v in f.logv.ravel(order="C"))
    return "\n".join(lines) + "\n"


class FormatError(ValueError):
    """Malformed ``gridfn`` text."""


def from_text(text):
    try:
        return _from_lines(text.splitlines())
    except FormatError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise FormatError(f"malformed gridfn text: {exc}") from None


def _from_lines(lines):
    if not lines or not lines[0].startswith("gridfn v1 dim="):
        raise FormatError("line 1: expected 'gridfn v1 dim=<d>'")
    try:
        dim = int(lines[0].split("dim=", 1)[1])
    except ValueError:
        raise FormatError("line 1: bad dimension") from None
    if dim < 1 or len(lines) < dim + 2:
        raise FormatError("truncated header")
    lo, hi, n = [], [], []
    for k in range(dim):
        parts = lines[1 + k].split()
        if len(parts) != 4 or parts[0] != "axis":
            raise FormatError(f"line {2 + k}: expected 'axis lo=.. hi=.. n=..'")
        kv = dict(p.split("=", 1) for p in parts[1:])
        lo.append(float(kv["lo"]))
        hi.append(float(kv["hi"]))
        n.append(int(kv["n"]))
    shift_line = lines[1 + dim].split()
    if not shift_line or shift_line[0] != "shift" or len(shift_line) != dim + 1:
        raise FormatError(f"line {2 + dim}: expected 'shift' with {dim} values")
    shift = tuple(float(s) for s in shift_line[1:])
    try:
        spec = GridSpec(tuple(lo), tuple(hi), tuple(n))
    except ParameterError as exc:
        raise FormatError(f"bad grid: {exc}") from None
    body = lines[2 + dim:]
    count = int(np.prod(spec.shape))
    if len(body) != count:
        raise FormatError(f"expected {count} values, found {len(body)}")
    vals = np.array([float(v) for v in body]).reshape(spec.shape)
    try:
        return GridFunction(spec, vals, shift)
    except ParameterError as exc:
        raise FormatError(str(exc)) from None


def save(f, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(to_text(f))


def load(path):
    with open(path, encoding="ascii") as fh:
        return from_text(fh.read())

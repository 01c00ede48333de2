"""Heat, Fokker-Planck and Ornstein-Uhlenbeck flows by direct kernel quadrature.

All three kernels are Gaussian in the source variable, of the form
``exp(-|alpha x - y|^2 / (2 s))``, so each flow is a separable log-domain
convolution. Functions are taken to vanish outside their grid.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np

from . import _backend
from .gridfn import GridFunction, GridSpec, ParameterError
from .transforms import _apply_axis, support_box


class FlowKind(enum.Enum):
    Heat = "Heat"
    FokkerPlanck = "FokkerPlanck"
    OrnsteinUhlenbeck = "OrnsteinUhlenbeck"


@dataclass(frozen=True)
class SemigroupSpec:
    kind: FlowKind
    t: float

    def __post_init__(self):
        if not (self.t >= 0.0) or not math.isfinite(self.t):
            raise ParameterError("flow time must be a finite nonnegative real")


KERNEL_RADIUS = 8.0
MIN_STEP = 0.01


def _gauss_flow(f, out, alpha, s, log_scale):
    if not f.is_nonzero():
        raise ParameterError("flow of the zero function")
    cur = f.logv + f.spec.log_weights()
    src = f.axes()
    dst = out.axes()
    for k in reversed(range(f.dim)):
        y = np.ascontiguousarray(src[k])
        x = np.ascontiguousarray(dst[k])
        cur = _apply_axis(cur, k, lambda m, x=x, y=y: _backend.lse_gauss(m, x, y, alpha, s))
    return GridFunction(out, cur + log_scale)


def _check_t(t):
    t = float(t)
    if not (t >= 0.0) or not math.isfinite(t):
        raise ParameterError("flow time must be a finite nonnegative real")
    return t


def _grown_spec(f, lo, hi, node_cap=None):
    n = []
    for k in range(f.dim):
        h = max(f.spec.h[k], MIN_STEP)
        nk = int(math.ceil((hi[k] - lo[k]) / h)) + 1
        cap = node_cap if node_cap is not None else (8001 if f.dim == 1 else max(f.spec.n[k], 257))
        n.append(max(2, min(nk, cap)))
    return GridSpec(tuple(lo), tuple(hi), tuple(n))


def heat_window(f, t, node_cap=None):
    """Output grid covering the support of ``f`` widened by eight kernel widths."""
    r = KERNEL_RADIUS * math.sqrt(t)
    box = support_box(f)
    return _grown_spec(f, [a - r for a, _ in box], [b + r for _, b in box], node_cap)


def fokker_planck_window(f, t, node_cap=None):
    a = math.exp(-t / 2.0)
    r = KERNEL_RADIUS * math.sqrt(math.expm1(t))
    box = support_box(f)
    return _grown_spec(f, [a * (lo - r) for lo, _ in box], [a * (hi + r) for _, hi in box], node_cap)


def heat(f, t, out=None):
    """``E_t f(y) = (2 pi t)^(-n/2) int f(x) exp(-|y - x|^2 / (2 t)) dx``.

    ``t = 0`` returns ``f`` itself without touching the kernel.
    """
    t = _check_t(t)
    if t == 0.0:
        return f
    out = heat_window(f, t) if out is None else out
    return _gauss_flow(f, out, 1.0, t, -0.5 * f.dim * math.log(2.0 * math.pi * t))


def fokker_planck(f, t, out=None):
    """``P_t f(x) = e^(nt/2) int f(y) exp(-|e^(t/2) x - y|^2 / (2 (e^t - 1))) dy / (2 pi (e^t - 1))^(n/2)``."""
    t = _check_t(t)
    if t == 0.0:
        return f
    out = fokker_planck_window(f, t) if out is None else out
    s = math.expm1(t)
    log_scale = 0.5 * f.dim * t - 0.5 * f.dim * math.log(2.0 * math.pi * s)
    return _gauss_flow(f, out, math.exp(t / 2.0), s, log_scale)


def ou(f, t, out=None):
    """``U_t g(x) = int g(e^-t x + sqrt(1 - e^-2t) z) dgamma(z)``.

    Evaluated as a Gaussian kernel in the source variable. Output nodes whose
    eight-deviation kernel window leaves the source grid see ``g`` as zero
    there; pick ``out`` with :func:`ou_window` to avoid them.
    """
    t = _check_t(t)
    if t == 0.0:
        return f
    out = f.spec if out is None else out
    s = -math.expm1(-2.0 * t)
    return _gauss_flow(f, out, math.exp(-t), s, -0.5 * f.dim * math.log(2.0 * math.pi * s))


def ou_window(f, t):
    """Largest output box whose kernel windows stay inside the source grid."""
    a = math.exp(-t)
    r = KERNEL_RADIUS * math.sqrt(-math.expm1(-2.0 * t))
    lo, hi = [], []
    for ax in f.axes():
        lo_k = (ax[0] + r) / a
        hi_k = (ax[-1] - r) / a
        if not hi_k > lo_k:
            raise ParameterError("source grid too small for this flow time")
        lo.append(max(lo_k, ax[0]))
        hi.append(min(hi_k, ax[-1]))
    n = [max(2, int(round((b - a_) / h)) + 1) for a_, b, h in zip(lo, hi, f.spec.h)]
    return GridSpec(tuple(lo), tuple(hi), tuple(n))


def evolve(f, kind, t, out=None):
    kind = FlowKind(kind)
    if kind is FlowKind.Heat:
        return heat(f, t, out)
    if kind is FlowKind.FokkerPlanck:
        return fokker_planck(f, t, out)
    return ou(f, t, out)


def convert_heat_fp_check(f, t, out=None):
    """Largest log gap between ``E_t f`` and its Fokker-Planck rewriting.

    The right side ``(1+t)^(-n/2) P_log(1+t) f((1+t)^(-1/2) x)`` is evaluated
    on the grid of scaled output nodes, which is again uniform, so no
    interpolation enters.
    """
    t = _check_t(t)
    if t == 0.0:
        return 0.0
    out = heat_window(f, t) if out is None else out
    left = heat(f, t, out)
    c = 1.0 / math.sqrt(1.0 + t)
    scaled = GridSpec(tuple(c * a for a in out.lo), tuple(c * b for b in out.hi), out.n)
    right = fokker_planck(f, math.log1p(t), scaled)
    rv = right.logv - 0.5 * f.dim * math.log1p(t)
    live = np.isfinite(left.logv) & np.isfinite(rv)
    if (np.isfinite(left.logv) != np.isfinite(rv)).any():
        return math.inf
    if not live.any():
        return 0.0
    return float(np.max(np.abs(left.logv[live] - rv[live])))

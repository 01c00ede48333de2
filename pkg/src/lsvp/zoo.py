"""Named test functions, each with an explicit default window.

Jump discontinuities sit halfway between nodes of the default windows, so the
trapezoid rule integrates indicators exactly and a closed or open box gives
the same samples.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .gridfn import GridSpec, ParameterError, sample, translate


def half_cell_axis(lo, hi, h):
    """``(lo', hi', n)`` for an axis of step ``h`` whose nodes sit at ``lo + (k + 1/2) h``."""
    n = int(round((hi - lo) / h))
    return lo + 0.5 * h, lo + (n - 0.5) * h, n


def _half_cell_spec(los, his, hs):
    axes = [half_cell_axis(a, b, h) for a, b, h in zip(los, his, hs)]
    return GridSpec(tuple(a for a, _, _ in axes), tuple(b for _, b, _ in axes), tuple(n for _, _, n in axes))


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    log_fn: object
    window: GridSpec
    even: bool = False
    compact: bool = False
    gaussian: bool = False
    integrable: bool = True
    shift: tuple = field(default=None)

    @property
    def dim(self):
        return self.window.dim

    def build(self, spec=None):
        """Samples on ``spec`` (default: the fixture window)."""
        spec = self.window if spec is None else spec
        if spec.dim != self.dim:
            raise ParameterError(f"fixture {self.name} is {self.dim}-dimensional")
        f = sample(spec, self.log_fn)
        return f if self.shift is None else translate(f, self.shift)

    __call__ = build


def _gauss(sigma):
    return lambda *xs: -sum(x * x for x in xs) / (2.0 * sigma)


def _box(a, b):
    return lambda x: np.where((x > a) & (x < b), 0.0, -np.inf)


ROT_ANGLE = math.pi / 6
ROT_VARIANCES = (2.0, 0.5)


def rot_covariance():
    c, s = math.cos(ROT_ANGLE), math.sin(ROT_ANGLE)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag(ROT_VARIANCES) @ R.T


def _rot_gauss():
    P = np.linalg.inv(rot_covariance())
    return lambda x, y: -0.5 * (P[0, 0] * x * x + 2 * P[0, 1] * x * y + P[1, 1] * y * y)


_BOX_X = half_cell_axis(-1.25, 1.25, 0.01)

FIXTURES = {
    f.name: f
    for f in [
        Fixture("gauss0.5", "exp(-x^2) on [-10, 10]", _gauss(0.5), GridSpec.box(-10, 10, 2001),
                even=True, gaussian=True),
        Fixture("gauss1", "exp(-x^2 / 2) on [-10, 10]", _gauss(1.0), GridSpec.box(-10, 10, 2001),
                even=True, gaussian=True),
        Fixture("gauss2", "exp(-x^2 / 4) on [-20, 20]", _gauss(2.0), GridSpec.box(-20, 20, 4001),
                even=True, gaussian=True),
        Fixture("gauss1_shift", "exp(-(x - 0.7)^2 / 2), the grid moved with it", _gauss(1.0),
                GridSpec.box(-10, 10, 2001), gaussian=True, shift=(0.7,)),
        Fixture("box11", "indicator of [-1, 1]", _box(-1.0, 1.0), _half_cell_spec([-1.25], [1.25], [2.5e-4]),
                even=True, compact=True),
        Fixture("box02", "indicator of [0, 2]", _box(0.0, 2.0), _half_cell_spec([-0.5], [2.5], [2.5e-4]),
                compact=True),
        Fixture("halfline", "indicator of [0, inf), cut by the right edge of [-10, 30]", _box(0.0, np.inf),
                _half_cell_spec([-10.0], [30.0], [0.01]), integrable=False),
        Fixture("abs_exp", "exp(-|x|) on [-30, 30]", lambda x: -np.abs(x), GridSpec.box(-30, 30, 60001),
                even=True),
        Fixture("exp_half", "exp(-x) on [0, inf), window [-10, 40]", lambda x: np.where(x > 0, -x, -np.inf),
                _half_cell_spec([-10.0], [40.0], [0.01])),
        Fixture("box_gauss2d", "indicator of [-1, 1] times exp(-y^2 / 2)",
                lambda x, y: np.where(np.abs(x) < 1.0, 0.0, -np.inf) - 0.5 * y * y,
                GridSpec((_BOX_X[0], -10.0), (_BOX_X[1], 10.0), (_BOX_X[2], 257)), even=True),
        Fixture("quartic2d", "exp(-x^2 / 2 - y^4 / 4)", lambda x, y: -0.5 * x * x - 0.25 * y ** 4,
                GridSpec.box(-10, 10, 257, 2), even=True),
        Fixture("rot_gauss2d", "Gaussian with variances (2, 0.5) rotated by pi/6", _rot_gauss(),
                GridSpec.box(-15, 15, 257, 2), even=True, gaussian=True),
    ]
}


def names():
    return list(FIXTURES)


def get(name):
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}") from None


def build(name, spec=None):
    return get(name).build(spec)

"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics. Output nodes are processed in blocks so the
temporary ``(block, n)`` array stays small.
"""

import numpy as np

_BLOCK_ELEMS = 1 << 20


def _lse_rows(v):
    top = np.max(v, axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(v - safe[:, None]), axis=1))
    out = safe + s
    out[top == -np.inf] = -np.inf
    return out


def _blocked(a, x, term):
    a = np.ascontiguousarray(a, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    rows, n = a.shape
    out = np.empty((rows, x.shape[0]))
    block = max(1, _BLOCK_ELEMS // max(n, 1))
    for m in range(rows):
        for start in range(0, x.shape[0], block):
            xi = x[start:start + block]
            out[m, start:start + block] = _lse_rows(a[m][None, :] + term(xi))
    return out


def lse_affine(a, x, y):
    """out[m, i] = log sum_j exp(a[m, j] + x[i] * y[j])."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != np.shape(a)[1]:
        raise ValueError("y length must match the source axis")
    return _blocked(a, x, lambda xi: xi[:, None] * y[None, :])


def lse_gauss(a, x, y, alpha, s):
    """out[m, i] = log sum_j exp(a[m, j] - (alpha * x[i] - y[j])**2 / (2 s))."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != np.shape(a)[1]:
        raise ValueError("y length must match the source axis")
    if not s > 0.0:
        raise ValueError("kernel variance must be positive")
    inv2s = 1.0 / (2.0 * s)

    def term(xi):
        d = alpha * xi[:, None] - y[None, :]
        return -(d * d) * inv2s

    return _blocked(a, x, term)


def _legendre_row(psi, y, x):
    n = len(y)
    if n < 8:
        out, arg = [], []
        for xi in x:
            best, bj = -np.inf, -1
            for j in range(n):
                if psi[j] != np.inf:
                    val = xi * y[j] - psi[j]
                    if val > best:
                        best, bj = val, j
            out.append(best)
            arg.append(bj)
        return out, arg
    hull = []
    for j in range(n):
        pj = psi[j]
        if pj == np.inf:
            continue
        yj = y[j]
        while len(hull) >= 2:
            ia, ib = hull[-2], hull[-1]
            ya, pa, yb, pb = y[ia], psi[ia], y[ib], psi[ib]
            if (yb - ya) * (pj - pa) - (pb - pa) * (yj - ya) <= 0.0:
                hull.pop()
            else:
                break
        hull.append(j)
    if not hull:
        return [-np.inf] * len(x), [-1] * len(x)
    out, arg = [], []
    k = 0
    top = len(hull)
    for xi in x:
        best = xi * y[hull[k]] - psi[hull[k]]
        while k + 1 < top:
            val = xi * y[hull[k + 1]] - psi[hull[k + 1]]
            if val >= best:
                best = val
                k += 1
            else:
                break
        out.append(best)
        arg.append(hull[k])
    return out, arg


def legendre_rows_arg(psi, y, x):
    """Like :func:`legendre_rows`, also returning the maximizing source index (-1 if none)."""
    psi = np.asarray(psi, dtype=np.float64)
    y = [float(v) for v in np.asarray(y, dtype=np.float64)]
    x = [float(v) for v in np.asarray(x, dtype=np.float64)]
    if len(y) != psi.shape[1]:
        raise ValueError("y length must match the source axis")
    out = np.empty((psi.shape[0], len(x)))
    arg = np.empty((psi.shape[0], len(x)), dtype=np.intp)
    for m in range(psi.shape[0]):
        out[m], arg[m] = _legendre_row(psi[m].tolist(), y, x)
    return out, arg


def legendre_rows(psi, y, x):
    """out[m, i] = max_j (x[i] * y[j] - psi[m, j]); y and x ascending."""
    return legendre_rows_arg(psi, y, x)[0]

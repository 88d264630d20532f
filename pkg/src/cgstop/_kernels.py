"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba is importable and the
environment variable ``CGSTOP_DISABLE_NUMBA`` is unset (or ``0``). Both
implementations are always importable as ``numpy_impl`` and ``numba_impl``
so that tests and the benchmark can compare them directly.
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disabled():
    return os.environ.get("CGSTOP_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes", "on")


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def _np_diag_cg_advance(lam, f, r, p, gamma, s):
    """Advance f and r along p for A = diag(lam) and write s = A^T r.

    Returns (alpha, rsq, qq). ``alpha`` is nan when the curvature
    ``qq = |A p|^2`` is not positive; the arrays are then untouched.
    """
    q = lam * p
    qq = float(q @ q)
    if not qq > 0.0:
        return np.nan, np.nan, qq
    alpha = gamma / qq
    f += alpha * p
    r -= alpha * q
    np.multiply(lam, r, out=s)
    return alpha, float(r @ r), qq


def _np_product_form(zeros, x):
    x = np.asarray(x, dtype=np.float64)
    if zeros.size == 0:
        return np.ones_like(x)
    return np.prod(1.0 - x[..., None] / zeros, axis=-1)


def _np_interval_minima(e0, d):
    """Minimise |e0[j] + a d[j]|^2 over a in [0, 1] for every row j."""
    ed = np.einsum("ij,ij->i", e0, d)
    dd = np.einsum("ij,ij->i", d, d)
    ee = np.einsum("ij,ij->i", e0, e0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(dd > 0.0, -ed / dd, 0.0)
    a = np.clip(a, 0.0, 1.0)
    return a, ee + 2.0 * a * ed + a * a * dd


numpy_impl = SimpleNamespace(
    diag_cg_advance=_np_diag_cg_advance,
    product_form=_np_product_form,
    interval_minima=_np_interval_minima,
    name="numpy",
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _nb_diag_cg_advance(lam, f, r, p, gamma, s):
        n = lam.shape[0]
        qq = 0.0
        for i in range(n):
            qi = lam[i] * p[i]
            qq += qi * qi
        if not qq > 0.0:
            return np.nan, np.nan, qq
        alpha = gamma / qq
        rsq = 0.0
        for i in range(n):
            f[i] += alpha * p[i]
            r[i] -= alpha * lam[i] * p[i]
            s[i] = lam[i] * r[i]
            rsq += r[i] * r[i]
        return alpha, rsq, qq

    @numba.njit(cache=True)
    def _nb_product_flat(zeros, x):
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            v = 1.0
            for j in range(zeros.shape[0]):
                v *= 1.0 - x[i] / zeros[j]
            out[i] = v
        return out

    def _nb_product_form(zeros, x):
        x = np.asarray(x, dtype=np.float64)
        flat = np.ascontiguousarray(x.reshape(-1))
        return _nb_product_flat(np.ascontiguousarray(zeros, dtype=np.float64), flat).reshape(x.shape)

    @numba.njit(cache=True)
    def _nb_interval_minima(e0, d):
        m, n = e0.shape
        a = np.empty(m)
        val = np.empty(m)
        for j in range(m):
            ed = 0.0
            dd = 0.0
            ee = 0.0
            for i in range(n):
                ed += e0[j, i] * d[j, i]
                dd += d[j, i] * d[j, i]
                ee += e0[j, i] * e0[j, i]
            aj = -ed / dd if dd > 0.0 else 0.0
            aj = min(max(aj, 0.0), 1.0)
            a[j] = aj
            val[j] = ee + 2.0 * aj * ed + aj * aj * dd
        return a, val

    numba_impl = SimpleNamespace(
        diag_cg_advance=_nb_diag_cg_advance,
        product_form=_nb_product_form,
        interval_minima=_nb_interval_minima,
        name="numba",
    )
else:  # pragma: no cover
    numba_impl = None


HAVE_NUMBA = numba_impl is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()
active = numba_impl if USE_NUMBA else numpy_impl

diag_cg_advance = active.diag_cg_advance
product_form = active.product_form
interval_minima = active.interval_minima
BACKEND = active.name

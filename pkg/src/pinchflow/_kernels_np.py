"""NumPy implementations of the hot kernels.

Selected at import time when the compiled extension is unavailable; also kept
as the reference implementation the compiled kernels are cross-checked
against.  All arrays are float64; batch kernels take C-ordered stacks.
"""

import numpy as np

BACKEND = "numpy"


def pinch_quantities(A):
    """Scalar contractions of a batch of second fundamental forms.

    A has shape (B, n, n, k), symmetric in the two tangent slots.  Returns
    (normA2, normH2, normh2, dA2, dH2) as (B,) arrays, where dA2 and dH2 are
    the zeroth-order reaction terms 2|<A,A>|^2 + 2|Rperp|^2 and 2|<A,H>|^2.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    H = np.einsum("biia->ba", A)
    normH2 = np.einsum("ba,ba->b", H, H)
    normA2 = np.einsum("bija,bija->b", A, A)

    AH = np.einsum("bija,ba->bij", A, H)
    dH2 = 2.0 * np.einsum("bij,bij->b", AH, AH)

    # |h|^2 = |<A, nu1>|^2 = |AH|^2 / |H|^2; zero where |H| vanishes
    ah2 = np.einsum("bij,bij->b", AH, AH)
    normh2 = np.where(normH2 > 0.0, ah2 / np.where(normH2 > 0.0, normH2, 1.0), 0.0)

    M = np.einsum("bija,bpqa->bijpq", A, A)
    s1 = np.einsum("bijpq,bijpq->b", M, M)
    R = np.einsum("bipa,bjpc->bijac", A, A)
    Rp = R - R.transpose(0, 2, 1, 3, 4)
    s2 = np.einsum("bijac,bijac->b", Rp, Rp)
    dA2 = 2.0 * s1 + 2.0 * s2

    return normA2, normH2, normh2, dA2, dH2


def gradient_quantities(S):
    """|S|^2 and |trace(S)|^2 for a batch of gradient tensors (B, n, n, n, k)."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    normS2 = np.einsum("bijpa,bijpa->b", S, S)
    dH = np.einsum("biipa->bpa", S)
    normdH2 = np.einsum("bpa,bpa->b", dH, dH)
    return normS2, normdH2


def _roll(F, shift, axis):
    return np.roll(F, -shift, axis=axis)


def _d1(F, axis, delta, order):
    # the high-order branch uses the 6th-order stencil: first derivatives feed
    # the metric, whose truncation constant would otherwise dominate the
    # (4th-order) curvature error by a factor of six
    if order == 4:
        return (
            _roll(F, 3, axis) - 9.0 * _roll(F, 2, axis) + 45.0 * _roll(F, 1, axis)
            - 45.0 * _roll(F, -1, axis) + 9.0 * _roll(F, -2, axis) - _roll(F, -3, axis)
        ) / (60.0 * delta)
    return (_roll(F, 1, axis) - _roll(F, -1, axis)) / (2.0 * delta)


def _d2(F, axis, delta, order):
    if order == 4:
        return (
            -_roll(F, 2, axis) + 16.0 * _roll(F, 1, axis) - 30.0 * F
            + 16.0 * _roll(F, -1, axis) - _roll(F, -2, axis)
        ) / (12.0 * delta ** 2)
    return (_roll(F, 1, axis) - 2.0 * F + _roll(F, -1, axis)) / delta ** 2


def grid_geometry_core(F, order=4):
    """First/second fundamental form data of a doubly periodic immersion.

    F has shape (N, N, d) with d >= 3, sampled on the uniform [0, 2pi)^2 grid.
    Returns (g, detg, Hvec, Aon):

      g     (N, N, 2, 2)     induced metric from centered differences
      detg  (N, N)           determinant of g (NaN-safe; caller checks it)
      Hvec  (N, N, d)        ambient mean curvature vector
      Aon   (N, N, 2, 2, d)  normal-valued second fundamental form in the
                             orthonormalized tangent frame g^(-1/2) dF

    Points with detg <= 0 get NaN curvature output.
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    N = F.shape[0]
    delta = 2.0 * np.pi / N

    Fu = _d1(F, 0, delta, order)
    Fv = _d1(F, 1, delta, order)
    Fuu = _d2(F, 0, delta, order)
    Fvv = _d2(F, 1, delta, order)
    Fuv = _d1(Fu, 1, delta, order)
    return assemble_geometry(Fu, Fv, Fuu, Fuv, Fvv)


def assemble_geometry(Fu, Fv, Fuu, Fuv, Fvv):
    """Pointwise geometry from precomputed first/second derivatives of F."""
    tang = np.stack([Fu, Fv], axis=2)                      # (N, N, 2, d)
    g = np.einsum("xyad,xybd->xyab", tang, tang)           # (N, N, 2, 2)
    detg = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2

    good = detg > 0.0
    safe_det = np.where(good, detg, 1.0)

    # inverse metric, closed form
    ginv = np.empty_like(g)
    ginv[..., 0, 0] = g[..., 1, 1] / safe_det
    ginv[..., 1, 1] = g[..., 0, 0] / safe_det
    ginv[..., 0, 1] = -g[..., 0, 1] / safe_det
    ginv[..., 1, 0] = ginv[..., 0, 1]

    # inverse square root of the 2x2 SPD metric, closed form
    s = np.sqrt(safe_det)
    tau = np.sqrt(g[..., 0, 0] + g[..., 1, 1] + 2.0 * s)
    isq = np.empty_like(g)
    denom = s * tau
    isq[..., 0, 0] = (g[..., 1, 1] + s) / denom
    isq[..., 1, 1] = (g[..., 0, 0] + s) / denom
    isq[..., 0, 1] = -g[..., 0, 1] / denom
    isq[..., 1, 0] = isq[..., 0, 1]

    # normal projection of the second derivatives
    sec = np.empty(Fu.shape[:2] + (2, 2) + Fu.shape[2:])   # (N, N, 2, 2, d)
    sec[..., 0, 0, :] = Fuu
    sec[..., 0, 1, :] = Fuv
    sec[..., 1, 0, :] = Fuv
    sec[..., 1, 1, :] = Fvv
    dots = np.einsum("xyabd,xycd->xyabc", sec, tang)       # (N, N, 2, 2, 2)
    coeff = np.einsum("xycd,xyabc->xyabd", ginv, dots)
    Aamb = sec - np.einsum("xyabc,xycd->xyabd", coeff, tang)

    Aon = np.einsum("xyca,xydb,xyabe->xycde", isq, isq, Aamb)
    Hvec = Aon[..., 0, 0, :] + Aon[..., 1, 1, :]

    if not good.all():
        bad = ~good
        Aon[bad] = np.nan
        Hvec[bad] = np.nan

    return g, detg, Hvec, Aon

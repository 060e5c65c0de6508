# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the sampling and grid hot loops.

Same contracts as _kernels_np; that module is the reference implementation
and the two are cross-checked in the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, isnan, NAN

cnp.import_array()

BACKEND = "cython"


def pinch_quantities(A):
    """Scalar contractions of a batch of second fundamental forms.

    A has shape (B, n, n, k); returns (normA2, normH2, normh2, dA2, dH2).
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, :, :, ::1] a = A
    cdef Py_ssize_t B = a.shape[0], n = a.shape[1], k = a.shape[3]
    out_normA2 = np.empty(B)
    out_normH2 = np.empty(B)
    out_normh2 = np.empty(B)
    out_dA2 = np.empty(B)
    out_dH2 = np.empty(B)
    cdef double[::1] normA2 = out_normA2, normH2 = out_normH2
    cdef double[::1] normh2 = out_normh2, dA2 = out_dA2, dH2 = out_dH2
    scratch_H = np.empty(k)
    scratch_AH = np.empty((n, n))
    cdef double[::1] H = scratch_H
    cdef double[:, ::1] AH = scratch_AH
    cdef Py_ssize_t b, i, j, p, q, al, be
    cdef double acc, s1, s2, sA, sH, sAH, r1, r2

    with nogil:
        for b in range(B):
            sA = 0.0
            for i in range(n):
                for j in range(n):
                    for al in range(k):
                        sA += a[b, i, j, al] * a[b, i, j, al]
            normA2[b] = sA
            sH = 0.0
            for al in range(k):
                acc = 0.0
                for i in range(n):
                    acc += a[b, i, i, al]
                H[al] = acc
                sH += acc * acc
            normH2[b] = sH
            sAH = 0.0
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for al in range(k):
                        acc += a[b, i, j, al] * H[al]
                    AH[i, j] = acc
                    sAH += acc * acc
            dH2[b] = 2.0 * sAH
            normh2[b] = sAH / sH if sH > 0.0 else 0.0

            # |<A,A>|^2, exploiting symmetry in (i,j) <-> (p,q) pairs
            s1 = 0.0
            for i in range(n):
                for j in range(n):
                    for p in range(n):
                        for q in range(n):
                            acc = 0.0
                            for al in range(k):
                                acc += a[b, i, j, al] * a[b, p, q, al]
                            s1 += acc * acc
            # |Rperp|^2
            s2 = 0.0
            for i in range(n):
                for j in range(n):
                    for al in range(k):
                        for be in range(k):
                            r1 = 0.0
                            for p in range(n):
                                r1 += a[b, i, p, al] * a[b, j, p, be] \
                                    - a[b, j, p, al] * a[b, i, p, be]
                            s2 += r1 * r1
            dA2[b] = 2.0 * s1 + 2.0 * s2

    return out_normA2, out_normH2, out_normh2, out_dA2, out_dH2


def gradient_quantities(S):
    """|S|^2 and |trace(S)|^2 for a batch of gradient tensors (B, n, n, n, k)."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    cdef double[:, :, :, :, ::1] s = S
    cdef Py_ssize_t B = s.shape[0], n = s.shape[1], k = s.shape[4]
    out_nS = np.empty(B)
    out_ndH = np.empty(B)
    cdef double[::1] nS = out_nS, ndH = out_ndH
    cdef Py_ssize_t b, i, j, p, al
    cdef double acc, tot
    with nogil:
        for b in range(B):
            tot = 0.0
            for i in range(n):
                for j in range(n):
                    for p in range(n):
                        for al in range(k):
                            tot += s[b, i, j, p, al] * s[b, i, j, p, al]
            nS[b] = tot
            tot = 0.0
            for p in range(n):
                for al in range(k):
                    acc = 0.0
                    for i in range(n):
                        acc += s[b, i, i, p, al]
                    tot += acc * acc
            ndH[b] = tot
    return out_nS, out_ndH


cdef void _d1_line(double[:, :, ::1] F, double[:, :, ::1] out,
                   Py_ssize_t axis, double delta, int order, Py_ssize_t N,
                   Py_ssize_t M, Py_ssize_t d) noexcept nogil:
    # first derivative along `axis` (0 or 1); 6th-order stencil in the
    # high-order branch (see _kernels_np._d1), 2nd-order otherwise
    cdef Py_ssize_t x, y, c
    cdef Py_ssize_t p1, p2, p3, m1, m2, m3
    cdef double inv60 = 1.0 / (60.0 * delta), inv2 = 1.0 / (2.0 * delta)
    for x in range(N):
        for y in range(M):
            if axis == 0:
                p1 = (x + 1) % N; p2 = (x + 2) % N; p3 = (x + 3) % N
                m1 = (x - 1 + N) % N; m2 = (x - 2 + N) % N; m3 = (x - 3 + N) % N
                for c in range(d):
                    if order == 4:
                        out[x, y, c] = (F[p3, y, c] - 9.0 * F[p2, y, c]
                                        + 45.0 * F[p1, y, c] - 45.0 * F[m1, y, c]
                                        + 9.0 * F[m2, y, c] - F[m3, y, c]) * inv60
                    else:
                        out[x, y, c] = (F[p1, y, c] - F[m1, y, c]) * inv2
            else:
                p1 = (y + 1) % M; p2 = (y + 2) % M; p3 = (y + 3) % M
                m1 = (y - 1 + M) % M; m2 = (y - 2 + M) % M; m3 = (y - 3 + M) % M
                for c in range(d):
                    if order == 4:
                        out[x, y, c] = (F[x, p3, c] - 9.0 * F[x, p2, c]
                                        + 45.0 * F[x, p1, c] - 45.0 * F[x, m1, c]
                                        + 9.0 * F[x, m2, c] - F[x, m3, c]) * inv60
                    else:
                        out[x, y, c] = (F[x, p1, c] - F[x, m1, c]) * inv2


cdef void _d2_line(double[:, :, ::1] F, double[:, :, ::1] out,
                   Py_ssize_t axis, double delta, int order, Py_ssize_t N,
                   Py_ssize_t M, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t x, y, c
    cdef Py_ssize_t p1, p2, m1, m2
    cdef double inv12 = 1.0 / (12.0 * delta * delta), inv1 = 1.0 / (delta * delta)
    for x in range(N):
        for y in range(M):
            if axis == 0:
                p1 = (x + 1) % N; p2 = (x + 2) % N
                m1 = (x - 1 + N) % N; m2 = (x - 2 + N) % N
                for c in range(d):
                    if order == 4:
                        out[x, y, c] = (-F[p2, y, c] + 16.0 * F[p1, y, c]
                                        - 30.0 * F[x, y, c] + 16.0 * F[m1, y, c]
                                        - F[m2, y, c]) * inv12
                    else:
                        out[x, y, c] = (F[p1, y, c] - 2.0 * F[x, y, c]
                                        + F[m1, y, c]) * inv1
            else:
                p1 = (y + 1) % M; p2 = (y + 2) % M
                m1 = (y - 1 + M) % M; m2 = (y - 2 + M) % M
                for c in range(d):
                    if order == 4:
                        out[x, y, c] = (-F[x, p2, c] + 16.0 * F[x, p1, c]
                                        - 30.0 * F[x, y, c] + 16.0 * F[x, m1, c]
                                        - F[x, m2, c]) * inv12
                    else:
                        out[x, y, c] = (F[x, p1, c] - 2.0 * F[x, y, c]
                                        + F[x, m1, c]) * inv1


def grid_geometry_core(F, order=4):
    """First/second fundamental form data of a doubly periodic immersion.

    Same contract as the NumPy reference: returns (g, detg, Hvec, Aon) with
    NaN curvature at points where the metric degenerates.
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    cdef double[:, :, ::1] f = F
    cdef Py_ssize_t N = f.shape[0], M = f.shape[1], d = f.shape[2]
    cdef int iorder = int(order)
    cdef double delta = 2.0 * np.pi / N

    Fu_a = np.empty_like(F); Fv_a = np.empty_like(F)
    Fuu_a = np.empty_like(F); Fvv_a = np.empty_like(F); Fuv_a = np.empty_like(F)
    cdef double[:, :, ::1] Fu = Fu_a, Fv = Fv_a, Fuu = Fuu_a, Fvv = Fvv_a, Fuv = Fuv_a

    g_a = np.empty((N, M, 2, 2))
    detg_a = np.empty((N, M))
    H_a = np.empty((N, M, d))
    Aon_a = np.empty((N, M, 2, 2, d))
    cdef double[:, :, :, ::1] g = g_a
    cdef double[:, ::1] detg = detg_a
    cdef double[:, :, ::1] Hv = H_a
    cdef double[:, :, :, :, ::1] Aon = Aon_a

    cdef Py_ssize_t x, y, c
    cdef double g00, g01, g11, det, s, tau, denom
    cdef double gi00, gi01, gi11, is00, is01, is11
    cdef double dot0, dot1, co0, co1
    cdef double amb00, amb01, amb11
    cdef double a00, a01, a11

    with nogil:
        _d1_line(f, Fu, 0, delta, iorder, N, M, d)
        _d1_line(f, Fv, 1, delta, iorder, N, M, d)
        _d2_line(f, Fuu, 0, delta, iorder, N, M, d)
        _d2_line(f, Fvv, 1, delta, iorder, N, M, d)
        _d1_line(Fu, Fuv, 1, delta, iorder, N, M, d)

        for x in range(N):
            for y in range(M):
                g00 = 0.0; g01 = 0.0; g11 = 0.0
                for c in range(d):
                    g00 += Fu[x, y, c] * Fu[x, y, c]
                    g01 += Fu[x, y, c] * Fv[x, y, c]
                    g11 += Fv[x, y, c] * Fv[x, y, c]
                g[x, y, 0, 0] = g00; g[x, y, 0, 1] = g01
                g[x, y, 1, 0] = g01; g[x, y, 1, 1] = g11
                det = g00 * g11 - g01 * g01
                detg[x, y] = det
                if det <= 0.0:
                    for c in range(d):
                        Hv[x, y, c] = NAN
                        Aon[x, y, 0, 0, c] = NAN; Aon[x, y, 0, 1, c] = NAN
                        Aon[x, y, 1, 0, c] = NAN; Aon[x, y, 1, 1, c] = NAN
                    continue
                gi00 = g11 / det; gi11 = g00 / det; gi01 = -g01 / det
                s = sqrt(det)
                tau = sqrt(g00 + g11 + 2.0 * s)
                denom = s * tau
                is00 = (g11 + s) / denom
                is11 = (g00 + s) / denom
                is01 = -g01 / denom

                # dots and projection, unrolled over the 2x2 symmetric slots
                # slot (0,0) = Fuu, (0,1) = Fuv, (1,1) = Fvv
                # compute dot products with tangent vectors first
                dot0 = 0.0; dot1 = 0.0
                for c in range(d):
                    dot0 += Fuu[x, y, c] * Fu[x, y, c]
                    dot1 += Fuu[x, y, c] * Fv[x, y, c]
                co0 = gi00 * dot0 + gi01 * dot1
                co1 = gi01 * dot0 + gi11 * dot1
                for c in range(d):
                    Aon[x, y, 0, 0, c] = Fuu[x, y, c] - co0 * Fu[x, y, c] - co1 * Fv[x, y, c]

                dot0 = 0.0; dot1 = 0.0
                for c in range(d):
                    dot0 += Fuv[x, y, c] * Fu[x, y, c]
                    dot1 += Fuv[x, y, c] * Fv[x, y, c]
                co0 = gi00 * dot0 + gi01 * dot1
                co1 = gi01 * dot0 + gi11 * dot1
                for c in range(d):
                    Aon[x, y, 0, 1, c] = Fuv[x, y, c] - co0 * Fu[x, y, c] - co1 * Fv[x, y, c]

                dot0 = 0.0; dot1 = 0.0
                for c in range(d):
                    dot0 += Fvv[x, y, c] * Fu[x, y, c]
                    dot1 += Fvv[x, y, c] * Fv[x, y, c]
                co0 = gi00 * dot0 + gi01 * dot1
                co1 = gi01 * dot0 + gi11 * dot1
                for c in range(d):
                    Aon[x, y, 1, 1, c] = Fvv[x, y, c] - co0 * Fu[x, y, c] - co1 * Fv[x, y, c]

                # rotate the projected derivatives into the orthonormal frame:
                # Aon_cd = isq_ca isq_db Aamb_ab (2x2 symmetric, ambient-valued)
                for c in range(d):
                    amb00 = Aon[x, y, 0, 0, c]
                    amb01 = Aon[x, y, 0, 1, c]
                    amb11 = Aon[x, y, 1, 1, c]
                    a00 = (is00 * is00 * amb00 + 2.0 * is00 * is01 * amb01
                           + is01 * is01 * amb11)
                    a01 = (is00 * is01 * amb00 + (is00 * is11 + is01 * is01) * amb01
                           + is01 * is11 * amb11)
                    a11 = (is01 * is01 * amb00 + 2.0 * is01 * is11 * amb01
                           + is11 * is11 * amb11)
                    Aon[x, y, 0, 0, c] = a00
                    Aon[x, y, 0, 1, c] = a01
                    Aon[x, y, 1, 0, c] = a01
                    Aon[x, y, 1, 1, c] = a11
                    Hv[x, y, c] = a00 + a11

    return g_a, detg_a, H_a, Aon_a

"""Parametric mean curvature flow of doubly periodic immersed tori in
R^(2+k) on a uniform grid.

The grid covers [0, 2pi)^2; periodicity is index arithmetic mod N. Geometry
is computed with centered finite differences (4th order by default, spectral
differentiation optional), the tangent frame is orthonormalized through the
symmetric inverse square root of the metric, and only frame-invariant scalars
are consumed downstream. Time stepping is explicit RK4 on dF/dt = H.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend, _kernels_np
from .curvature import CurvatureData, Dims, PinchingParams
from .errors import (
    BadResolution,
    DegenerateMetric,
    EmptySchedule,
    InsufficientData,
    StepTooSmall,
    ZeroMeanCurvature,
)

DEGENERATE_REL = 1e-12     # detg below this multiple of (tr g / 2)^2 is singular
H_FLOOR = 1e-14


@dataclass
class GridImmersion:
    """Doubly periodic immersion samples F: N x N grid of ambient (2+k)-vectors."""

    N: int
    k: int
    F: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        F = np.ascontiguousarray(self.F, dtype=np.float64)
        if F.shape != (self.N, self.N, 2 + self.k):
            raise ValueError(f"F must have shape {(self.N, self.N, 2 + self.k)}")
        if not np.isfinite(F).all():
            raise ValueError("F must be finite everywhere")
        self.F = F


def build_torus(r1, r2, N, k) -> GridImmersion:
    """Product torus S^1(r1) x S^1(r2) in R^4, zero-padded into R^(2+k)."""
    if r1 <= 0 or r2 <= 0:
        raise ValueError("torus radii must be positive")
    if k < 2:
        raise BadResolution("the product torus needs codimension k >= 2")
    if N < 16 or N % 2 != 0:
        raise BadResolution(f"grid resolution must be even and >= 16, got {N}")
    u = 2.0 * np.pi * np.arange(N) / N
    uu, vv = np.meshgrid(u, u, indexing="ij")
    F = np.zeros((N, N, 2 + k))
    F[..., 0] = r1 * np.cos(uu)
    F[..., 1] = r1 * np.sin(uu)
    F[..., 2] = r2 * np.cos(vv)
    F[..., 3] = r2 * np.sin(vv)
    return GridImmersion(N, k, F)


def _spectral_derivatives(F):
    N = F.shape[0]
    freq = np.fft.fftfreq(N, d=1.0 / N) * 1j
    Fu_hat = np.fft.fft(F, axis=0) * freq[:, None, None]
    Fv_hat = np.fft.fft(F, axis=1) * freq[None, :, None]
    Fu = np.real(np.fft.ifft(Fu_hat, axis=0))
    Fv = np.real(np.fft.ifft(Fv_hat, axis=1))
    Fuu = np.real(np.fft.ifft(Fu_hat * freq[:, None, None], axis=0))
    Fvv = np.real(np.fft.ifft(Fv_hat * freq[None, :, None], axis=1))
    Fuv = np.real(np.fft.ifft(np.fft.fft(Fu, axis=1) * freq[None, :, None], axis=1))
    return Fu, Fv, Fuu, Fuv, Fvv


@dataclass
class GridGeometry:
    """Pointwise first/second fundamental form data over the whole grid.

    Frame-dependent extras (orthonormal tangent frame, normal frames, full
    curvature components) are computed lazily; the flow loop only touches the
    frame-invariant fields.
    """

    N: int
    k: int
    g: np.ndarray            # (N, N, 2, 2)
    detg: np.ndarray         # (N, N)
    Hvec: np.ndarray         # (N, N, d) ambient mean curvature vector
    Aon: np.ndarray          # (N, N, 2, 2, d) normal-valued, orthonormal tangent frame
    F: np.ndarray            # the immersion the geometry was computed from
    deriv_order: int = 4
    mode: str = "fd"
    max_a2: float = 0.0
    max_h2: float = 0.0
    area: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def sqrt_detg(self):
        return np.sqrt(self.detg)

    @property
    def ginv(self):
        out = np.empty_like(self.g)
        out[..., 0, 0] = self.g[..., 1, 1] / self.detg
        out[..., 1, 1] = self.g[..., 0, 0] / self.detg
        out[..., 0, 1] = -self.g[..., 0, 1] / self.detg
        out[..., 1, 0] = out[..., 0, 1]
        return out

    @property
    def weights(self):
        """Quadrature weights sqrt(det g) * (2pi/N)^2 per grid point."""
        return self.sqrt_detg * (2.0 * np.pi / self.N) ** 2

    def norm_a2_field(self):
        if "a2" not in self._cache:
            self._cache["a2"] = np.einsum("xyabd,xyabd->xy", self.Aon, self.Aon)
        return self._cache["a2"]

    def norm_h2_field(self):
        if "h2" not in self._cache:
            self._cache["h2"] = np.einsum("xyd,xyd->xy", self.Hvec, self.Hvec)
        return self._cache["h2"]

    def scalar_h_field(self):
        """The 2x2 symmetric <A, nu1> and |Ahat|^2, both frame-invariant."""
        if "hmat" not in self._cache:
            normH = np.sqrt(self.norm_h2_field())
            nu1 = self.Hvec / np.maximum(normH, H_FLOOR)[..., None]
            hmat = np.einsum("xyabd,xyd->xyab", self.Aon, nu1)
            ahat2 = self.norm_a2_field() - np.einsum("xyab,xyab->xy", hmat, hmat)
            self._cache["hmat"] = hmat
            self._cache["ahat2"] = ahat2
        return self._cache["hmat"], self._cache["ahat2"]

    @property
    def tang(self):
        """Orthonormalized tangent frame g^(-1/2) (F_u, F_v), shape (N, N, 2, d)."""
        if "tang" not in self._cache:
            if self.mode == "spectral":
                Fu, Fv, *_ = _spectral_derivatives(self.F)
            else:
                delta = 2.0 * np.pi / self.N
                Fu = _kernels_np._d1(self.F, 0, delta, self.deriv_order)
                Fv = _kernels_np._d1(self.F, 1, delta, self.deriv_order)
            s = np.sqrt(self.detg)
            tau = np.sqrt(self.g[..., 0, 0] + self.g[..., 1, 1] + 2.0 * s)
            isq = np.empty_like(self.g)
            denom = s * tau
            isq[..., 0, 0] = (self.g[..., 1, 1] + s) / denom
            isq[..., 1, 1] = (self.g[..., 0, 0] + s) / denom
            isq[..., 0, 1] = -self.g[..., 0, 1] / denom
            isq[..., 1, 0] = isq[..., 0, 1]
            raw = np.stack([Fu, Fv], axis=2)
            self._cache["tang"] = np.einsum("xyia,xyad->xyid", isq, raw)
        return self._cache["tang"]

    def normal_frames(self):
        """Orthonormal basis of the normal space per point, (N, N, k, d).

        Null space of the tangent frame by SVD, signs fixed deterministically.
        """
        if "frames" not in self._cache:
            N, k = self.N, self.k
            d = 2 + k
            M = self.tang.reshape(-1, 2, d)
            _, _, vt = np.linalg.svd(M)
            nor = vt[:, 2:, :]
            idx = np.argmax(np.abs(nor), axis=2)
            signs = np.sign(np.take_along_axis(nor, idx[:, :, None], axis=2))[:, :, 0]
            signs[signs == 0] = 1.0
            nor = nor * signs[:, :, None]
            self._cache["frames"] = nor.reshape(N, N, k, d)
        return self._cache["frames"]

    def components(self):
        """A and H components in the per-point normal frame: (N,N,2,2,k), (N,N,k)."""
        nu = self.normal_frames()
        Acomp = np.einsum("xyabd,xygd->xyabg", self.Aon, nu)
        Hcomp = np.einsum("xyd,xygd->xyg", self.Hvec, nu)
        return Acomp, Hcomp

    def curvature_at(self, iu, iv) -> CurvatureData:
        """Pointwise CurvatureData in the orthonormalized frames at one grid point."""
        nu = self.normal_frames()[iu, iv]
        A = np.einsum("abd,gd->abg", self.Aon[iu, iv], nu)
        return CurvatureData(Dims(2, self.k), A, A.trace(axis1=0, axis2=1))


def geometry(grid: GridImmersion, deriv_order=4, mode="fd") -> GridGeometry:
    """Discrete geometry of the immersion; raises DegenerateMetric when the
    induced metric is numerically singular anywhere."""
    if mode == "fd":
        g, detg, Hvec, Aon = backend.kernels().grid_geometry_core(grid.F, deriv_order)
    elif mode == "spectral":
        g, detg, Hvec, Aon = _kernels_np.assemble_geometry(*_spectral_derivatives(grid.F))
    else:
        raise ValueError(f"unknown differentiation mode {mode!r}")
    trg = g[..., 0, 0] + g[..., 1, 1]
    if np.any(detg <= DEGENERATE_REL * (0.5 * trg) ** 2):
        raise DegenerateMetric("induced metric is singular on the grid")
    geo = GridGeometry(grid.N, grid.k, g, detg, Hvec, Aon, F=grid.F,
                       deriv_order=deriv_order, mode=mode)
    geo.max_a2 = float(geo.norm_a2_field().max())
    geo.max_h2 = float(geo.norm_h2_field().max())
    geo.area = float(geo.weights.sum())
    return geo


@dataclass
class GridSnapshot:
    t: float
    F: np.ndarray
    norm_h2: np.ndarray     # (N, N) |H|^2 field


@dataclass
class GridTrajectory:
    """Snapshots plus dense per-step diagnostics of one grid evolution."""

    N: int
    k: int
    times: np.ndarray          # per accepted step
    max_a2: np.ndarray
    max_h2: np.ndarray
    area: np.ndarray
    h2_integral: np.ndarray    # integral of |H|^2 dmu per step
    dt: np.ndarray
    snapshots: list
    stop_reason: str


def evolve_grid(grid: GridImmersion, cfl=0.1, t_end=None, stop_maxA2=1e6,
                snapshot_every=10, deriv_order=4, mode="fd") -> GridTrajectory:
    """Explicit RK4 mean curvature flow with curvature-limited steps.

    dt = cfl * (2pi/N)^2 / max(1, max|A|^2), so the step shrinks as curvature
    blows up. Halts at t_end, when max|A|^2 exceeds stop_maxA2, or when the
    step falls below 1e-12 (StepTooSmall if that happens before any step).
    """
    F = grid.F.copy()
    N = grid.N
    du2 = (2.0 * np.pi / N) ** 2
    t = grid.t
    times, maxa2s, maxh2s, areas, h2ints, dts = [], [], [], [], [], []
    snapshots = []
    stop_reason = "t_end"
    step = 0
    while True:
        geo = geometry(GridImmersion(N, grid.k, F, t), deriv_order, mode)
        h2f = geo.norm_h2_field()
        times.append(t)
        maxa2s.append(geo.max_a2)
        maxh2s.append(geo.max_h2)
        areas.append(geo.area)
        h2ints.append(float((h2f * geo.weights).sum()))
        if step % snapshot_every == 0:
            snapshots.append(GridSnapshot(t, F.copy(), h2f.copy()))
        if geo.max_a2 > stop_maxA2:
            stop_reason = "max_a2"
            break
        if t_end is not None and t >= t_end - 1e-15:
            stop_reason = "t_end"
            break
        dt = cfl * du2 / max(1.0, geo.max_a2)
        if t_end is not None:
            dt = min(dt, t_end - t)
        if dt < 1e-12:
            if step == 0:
                raise StepTooSmall(f"initial step {dt} below 1e-12")
            stop_reason = "step_too_small"
            break
        dts.append(dt)

        k1 = geo.Hvec
        k2 = geometry(GridImmersion(N, grid.k, F + 0.5 * dt * k1, t), deriv_order, mode).Hvec
        k3 = geometry(GridImmersion(N, grid.k, F + 0.5 * dt * k2, t), deriv_order, mode).Hvec
        k4 = geometry(GridImmersion(N, grid.k, F + dt * k3, t), deriv_order, mode).Hvec
        F = F + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        step += 1

    if snapshots[-1].t < times[-1]:
        snapshots.append(GridSnapshot(t, F.copy(), h2f.copy()))
    dts.append(0.0)
    return GridTrajectory(
        N=N, k=grid.k, times=np.array(times), max_a2=np.array(maxa2s),
        max_h2=np.array(maxh2s), area=np.array(areas),
        h2_integral=np.array(h2ints), dt=np.array(dts),
        snapshots=snapshots, stop_reason=stop_reason,
    )


# ---------------------------------------------------------------------------
# integral diagnostics

@dataclass
class IntegralDiagnostics:
    Lp: float
    supp_measure: float
    poincare_lhs: float
    poincare_rhs_terms: tuple     # (grad2 term, mixed term, cubic term)
    fitted_C: float | None
    f_sigma: np.ndarray           # per-point field, NaN where undefined


def pointwise_f_sigma(geom: GridGeometry, params: PinchingParams):
    """Per-point f_sigma = (-lambda1 - eps w + Lambda v) / |H|^(1-sigma).

    NaN where W <= 0 (w undefined there, so the point cannot be in the
    support of any truncation). Raises ZeroMeanCurvature if |H| hits the
    floor anywhere, since support membership is then undecidable.
    """
    normH2 = geom.norm_h2_field()
    if np.any(normH2 <= H_FLOOR ** 2):
        raise ZeroMeanCurvature("|H| vanishes somewhere on the grid")
    normH = np.sqrt(normH2)
    normA2 = geom.norm_a2_field()
    hmat, ahat2 = geom.scalar_h_field()
    # eigenvalues of the 2x2 symmetric h
    mean = 0.5 * (hmat[..., 0, 0] + hmat[..., 1, 1])
    rad = np.sqrt(0.25 * (hmat[..., 0, 0] - hmat[..., 1, 1]) ** 2 + hmat[..., 0, 1] ** 2)
    lam1 = mean - rad
    n = 2
    W = (4.0 / (3.0 * n) - params.eps0 / 2.0) * normH2 - normA2
    v = ahat2 / normH
    f_sigma = np.full(normH.shape, np.nan)
    pos = W > 0.0
    if pos.any():
        f = -lam1[pos] - params.eps * np.sqrt(W[pos]) + params.Lambda * v[pos]
        f_sigma[pos] = f / normH[pos] ** (1.0 - params.sigma)
    return f_sigma


def integral_diagnostics(geom: GridGeometry, params: PinchingParams,
                         p: float, k_level: float) -> IntegralDiagnostics:
    """Level-set truncation integrals and the two sides of the integral
    curvature inequality, with the gauge-limited gradient estimate.

    The inequality constant is reported as a fitted ratio, never asserted:
    the discrete |grad A| is gauge-corrected but still carries residual
    transport error.
    """
    f_sigma = pointwise_f_sigma(geom, params)
    fk = np.where(np.isnan(f_sigma), 0.0, np.maximum(f_sigma - k_level, 0.0))
    wts = geom.weights
    Lp = float(((fk ** p) * wts).sum())
    supp = float(wts[fk > 0.0].sum())

    u = fk ** (p / 2.0)
    hmat, ahat2 = geom.scalar_h_field()
    normh2 = np.einsum("xyab,xyab->xy", hmat, hmat)
    normA2 = geom.norm_a2_field()
    lhs = float((normh2 * u ** 2 * wts).sum())

    grad_a2 = _grad_a2_gauged(geom)
    grad_u2 = _grad_scalar2(geom, u)
    normA2_safe = np.maximum(normA2, 1e-300)
    term1 = float((u ** 2 * grad_a2 / normA2_safe * wts).sum())
    term2 = float((u * np.sqrt(grad_u2) * np.sqrt(grad_a2 / normA2_safe) * wts).sum())
    term3 = float((np.sqrt(normA2) * np.sqrt(ahat2) * u ** 2 * wts).sum())
    rhs_total = term1 + term2 + term3
    fitted = lhs / rhs_total if rhs_total > 0 else None
    return IntegralDiagnostics(Lp, supp, lhs, (term1, term2, term3), fitted, f_sigma)


def _grad_scalar2(geom: GridGeometry, u):
    """|grad u|^2 = g^{ab} du_a du_b with centered differences."""
    N = geom.N
    delta = 2.0 * np.pi / N
    du = np.stack(
        [(np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * delta),
         (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * delta)],
        axis=-1,
    )
    return np.einsum("xyab,xya,xyb->xy", geom.ginv, du, du)


def _grad_a2_gauged(geom: GridGeometry):
    """Squared covariant derivative of A, approximated in a parallel-transport
    corrected gauge.

    For each coordinate direction the neighbor's components are rotated into
    the center point's tangent/normal frames (polar-orthonormalized projection
    transport) before the centered difference is taken.
    """
    N, k = geom.N, geom.k
    delta = 2.0 * np.pi / N
    Acomp, _ = geom.components()
    E = geom.tang              # (N, N, 2, d)
    NU = geom.normal_frames()  # (N, N, k, d)

    def transported(shift, axis):
        En = np.roll(E, -shift, axis=axis)
        NUn = np.roll(NU, -shift, axis=axis)
        An = np.roll(Acomp, -shift, axis=axis)
        # Mt[i, j] = <E_neighbor_i, E_center_j>: the center frame expressed in
        # neighbor coordinates; its polar factor transports center -> neighbor
        Mt = np.einsum("xyid,xyjd->xyij", En, E)
        Mn = np.einsum("xyad,xybd->xyab", NUn, NU)
        Ot = _polar(Mt)
        On = _polar(Mn)
        # neighbor components expressed in the center-aligned gauge
        return np.einsum("xyij,xyml,xyab,xyima->xyjlb", Ot, Ot, On, An)

    diffs = []
    for axis in (0, 1):
        Ap = transported(1, axis)
        Am = transported(-1, axis)
        diffs.append((Ap - Am) / (2 * delta))
    D = np.stack(diffs, axis=-1)   # (N, N, 2, 2, k, 2)
    return np.einsum("xyab,xyijga,xyijgb->xy", geom.ginv, D, D)


def _polar(M):
    """Orthogonal polar factor of a batch of small matrices."""
    u, _, vt = np.linalg.svd(M)
    return u @ vt


# ---------------------------------------------------------------------------
# rescaling and singularity classification

@dataclass
class RescaleSnapshot:
    j: int
    t_tilde: float
    t_j: float
    x_index: tuple        # (iu, iv)
    L_j: float
    center: np.ndarray
    points: np.ndarray    # (N*N, d) rescaled coordinates L_j (F - center)
    time_window: tuple    # (-L_j^2 t_j, L_j^2 (t_last - t_j))
    norm_h_center: float  # rescaled |H| at the center, 1 by construction


def rescale_sequence(traj: GridTrajectory, schedule):
    """Curvature-normalizing rescalings about near-maximal curvature points.

    For each scheduled time the selection maximizes (t_tilde - t) |H|^2(x, t)
    over stored snapshots with t <= t_tilde; ties break to the earliest time
    and lowest grid index.
    """
    schedule = list(schedule)
    if not schedule:
        raise EmptySchedule("schedule contains no times")
    t_last = traj.snapshots[-1].t
    if max(schedule) > t_last + 1e-15:
        raise ValueError(f"schedule reaches {max(schedule)} but trajectory ends at {t_last}")
    if min(schedule) < traj.snapshots[0].t:
        raise ValueError("schedule starts before the first stored snapshot")
    out = []
    for j, t_tilde in enumerate(schedule):
        best_val = -np.inf
        best = None
        for snap in traj.snapshots:
            if snap.t > t_tilde + 1e-15:
                break
            vals = (t_tilde - snap.t) * snap.norm_h2
            vmax = float(vals.max())
            # near-ties (1e-12 relative) break to the earliest time and the
            # lowest grid index, so homogeneous states select reproducibly
            if vmax > best_val * (1.0 + 1e-12) + 0.0:
                flat = int(np.argmax(vals.ravel() >= vmax * (1.0 - 1e-12)))
                best_val = vmax
                best = (snap, flat)
        snap, flat = best
        iu, iv = np.unravel_index(flat, snap.norm_h2.shape)
        L = float(np.sqrt(snap.norm_h2[iu, iv]))
        center = snap.F[iu, iv].copy()
        points = (L * (snap.F - center)).reshape(-1, snap.F.shape[-1])
        window = (-(L ** 2) * snap.t, L ** 2 * (t_last - snap.t))
        out.append(RescaleSnapshot(
            j=j, t_tilde=t_tilde, t_j=snap.t, x_index=(int(iu), int(iv)), L_j=L,
            center=center, points=points, time_window=window,
            norm_h_center=float(np.sqrt(snap.norm_h2[iu, iv])) / L,
        ))
    return out


@dataclass
class Classification:
    T_est: float
    series: np.ndarray        # (T_est - t) * max|A|^2 over the fit window
    verdict: str              # 'typeI' | 'typeII' | 'inconclusive'
    C: float | None


def classify_series(times, max_a2) -> Classification:
    """Type I / type II verdict from the blow-up rate of max|A|^2.

    T_est comes from a linear fit of 1/max|A|^2 over the last 20% of samples
    (the homothetic rate makes that asymptotically linear in t).
    """
    times = np.asarray(times, dtype=float)
    max_a2 = np.asarray(max_a2, dtype=float)
    if len(times) < 50:
        raise InsufficientData(f"need >= 50 samples, got {len(times)}")
    m = max(2, len(times) // 5)
    ts, ys = times[-m:], 1.0 / max_a2[-m:]
    slope, intercept = np.polyfit(ts, ys, 1)
    if slope >= 0:
        return Classification(np.nan, np.array([]), "inconclusive", None)
    T_est = -intercept / slope
    # type II data decays 1/max|A|^2 faster than linearly, so the fitted root
    # can land inside the sampled range; push it just past the last sample
    if T_est <= times[-1]:
        T_est = times[-1] + (times[-1] - times[-2])
    rem = T_est - times
    valid = rem > 0
    series = rem[valid] * max_a2[valid]
    tv = times[valid]
    # final decade of remaining time; widen to the trailing 5 samples when the
    # grid is too coarse near the end (uniform schedules on exact flows)
    last_rem = T_est - tv[-1]
    win = (T_est - tv) <= 10.0 * last_rem
    if win.sum() < 5:
        win = np.zeros(len(tv), dtype=bool)
        win[-min(5, len(tv)):] = True
    wseries = series[win]
    if len(wseries) >= 2:
        drift = (wseries.max() - wseries.min()) / wseries.max()
        if drift < 0.10:
            return Classification(T_est, series, "typeI", float(wseries.max()))
        growth = wseries[-1] / wseries[0]
        if growth > 10.0 and np.all(np.diff(wseries) >= -1e-12 * wseries[:-1]):
            return Classification(T_est, series, "typeII", None)
    return Classification(T_est, series, "inconclusive", None)


def classify_type(traj) -> Classification:
    """Classify any trajectory exposing .times and .max_a2."""
    ma = traj.max_a2
    return classify_series(np.asarray(traj.times), np.asarray(ma))


# ---------------------------------------------------------------------------
# file formats

def save_snapshot_csv(snap: GridSnapshot, N, k, path, timestamp=True):
    """CSV dump of the immersion: header (N, k, t), one row per grid point."""
    with open(path, "w") as fh:
        if timestamp:
            import datetime

            fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write(f"# N={N} k={k} t={snap.t:.17g}\n")
        fh.write(",".join(f"x{d}" for d in range(2 + k)) + "\n")
        for row in snap.F.reshape(-1, 2 + k):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def save_snapshot_npz(snap: GridSnapshot, N, k, path):
    np.savez(path, N=N, k=k, t=snap.t, F=snap.F, norm_h2=snap.norm_h2)


def save_pointcloud_csv(rs: RescaleSnapshot, path, timestamp=True):
    """Rescaled point cloud, one row per grid point."""
    with open(path, "w") as fh:
        if timestamp:
            import datetime

            fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write(f"# j={rs.j} t_tilde={rs.t_tilde:.17g} t_j={rs.t_j:.17g} "
                 f"L_j={rs.L_j:.17g}\n")
        d = rs.points.shape[1]
        fh.write(",".join(f"y{i}" for i in range(d)) + "\n")
        for row in rs.points:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

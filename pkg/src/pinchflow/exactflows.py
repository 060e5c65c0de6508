"""Closed-form and ODE trajectories for the homogeneous model solutions:
shrinking spheres, generalized cylinders R^m x S^(n-m)(r), and products of
two spheres in codimension two.

These solutions are homogeneous, so a single point's curvature data
represents the whole submanifold at each time.
"""

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureData, Dims, PinchingParams, decompose, pinching_report
from .errors import BadSpec, TimeBeyondSingularity

# fraction of the singular time kept clear by every trajectory
def _stop_time(T):
    return T - max(1e-9, 1e-6 * T)


@dataclass(frozen=True)
class ExactSpec:
    """One model solution: kind in {sphere, cylinder, product}.

    radii carries (r0,) for the sphere, (m, r0) for the cylinder
    R^m x S^(n-m)(r0), and (p, q, a0, b0) for S^p(a0) x S^q(b0).
    """

    kind: str
    dims: Dims
    radii: tuple

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        try:
            if self.kind == "sphere":
                (r0,) = self.radii
                if r0 <= 0:
                    raise BadSpec("sphere radius must be positive")
            elif self.kind == "cylinder":
                m, r0 = self.radii
                if not (1 <= int(m) <= n - 1):
                    raise BadSpec(f"cylinder flat factor m must lie in 1..{n - 1}")
                if r0 <= 0:
                    raise BadSpec("cylinder radius must be positive")
            elif self.kind == "product":
                p, q, a0, b0 = self.radii
                if int(p) + int(q) != n or int(p) < 1 or int(q) < 1:
                    raise BadSpec(f"product needs p + q = n with p, q >= 1, got p={p}, q={q}")
                if a0 <= 0 or b0 <= 0:
                    raise BadSpec("product radii must be positive")
                if k < 2:
                    raise BadSpec("the sphere product needs codimension k >= 2")
            else:
                raise BadSpec(f"unknown kind {self.kind!r}")
        except (ValueError, TypeError) as exc:
            raise BadSpec(f"malformed radii {self.radii!r} for {self.kind}: {exc}") from None

    @property
    def shrink_dims(self):
        """ODE factors: dr_i/dt = -shrink_dims[i] / r_i."""
        if self.kind == "sphere":
            return np.array([float(self.dims.n)])
        if self.kind == "cylinder":
            return np.array([float(self.dims.n - int(self.radii[0]))])
        p, q = int(self.radii[0]), int(self.radii[1])
        return np.array([float(p), float(q)])

    @property
    def r0(self):
        if self.kind == "sphere":
            return np.array([self.radii[0]], dtype=float)
        if self.kind == "cylinder":
            return np.array([self.radii[1]], dtype=float)
        return np.array([self.radii[2], self.radii[3]], dtype=float)

    @property
    def T_sing(self):
        return float(np.min(self.r0 ** 2 / (2.0 * self.shrink_dims)))

    def radii_names(self):
        return ("a", "b") if self.kind == "product" else ("r",)


def exact_state(spec: ExactSpec, radii) -> CurvatureData:
    """Curvature data of the model solution at the given radii."""
    n, k = spec.dims.n, spec.dims.k
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise BadSpec("radii must be positive")
    A = np.zeros((n, n, k))
    if spec.kind == "sphere":
        (r,) = radii
        A[:, :, 0] = np.eye(n) / r
    elif spec.kind == "cylinder":
        m = int(spec.radii[0])
        (r,) = radii
        diag = np.zeros(n)
        diag[m:] = 1.0 / r
        A[:, :, 0] = np.diag(diag)
    else:
        p = int(spec.radii[0])
        a, b = radii
        A[:p, :p, 0] = np.eye(p) / a
        A[p:, p:, 1] = np.eye(n - p) / b
    return CurvatureData.from_tensor(A)


def closed_radii(spec: ExactSpec, t):
    """Closed-form radii r_i(t) = sqrt(r0_i^2 - 2 d_i t)."""
    sq = spec.r0 ** 2 - 2.0 * spec.shrink_dims * np.asarray(t, dtype=float)
    return np.sqrt(sq)


@dataclass
class ExactTrajectory:
    """Time-stamped states of one model solution (single representative point)."""

    spec: ExactSpec
    times: np.ndarray
    radii: np.ndarray          # (T, len(r0))
    states: list               # CurvatureData per time
    T_sing: float
    method: str

    @property
    def max_a2(self):
        """max |A|^2 over the submanifold = pointwise |A|^2 (homogeneous)."""
        return np.array([s.norm_A2() for s in self.states])

    @property
    def max_h2(self):
        return np.array([s.norm_H() ** 2 for s in self.states])


def _rk4_radii(spec: ExactSpec, t_grid, dt):
    """Fixed-step RK4 for dr/dt = -d/r, landing exactly on each grid time.

    Steps are capped at 1e-3 * r_min^2, which keeps the local error controlled
    as the ODE stiffens toward the singular time.
    """
    d = spec.shrink_dims

    def rhs(r):
        return -d / r

    r = spec.r0.copy()
    t = 0.0
    out = []
    for target in t_grid:
        while t < target - 1e-15:
            h = min(dt, 1e-3 * float(np.min(r)) ** 2, target - t)
            k1 = rhs(r)
            k2 = rhs(r + 0.5 * h * k1)
            k3 = rhs(r + 0.5 * h * k2)
            k4 = rhs(r + h * k3)
            r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out.append(r.copy())
    return np.array(out)


def evolve_exact(spec: ExactSpec, t_grid, method="closed_form", dt=1e-5) -> ExactTrajectory:
    """Trajectory of the model solution at the requested times.

    method 'closed_form' evaluates the exact radii; 'rk4' integrates the
    radius ODE with fixed steps of size dt (capped near the singularity).
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if t_grid[0] < 0:
        raise ValueError("t_grid must start at or after 0")
    T = spec.T_sing
    stop = _stop_time(T)
    if t_grid[-1] > stop:
        raise TimeBeyondSingularity(
            f"t = {t_grid[-1]} exceeds the usable window [0, {stop}] (T_sing = {T})"
        )
    if method == "closed_form":
        radii = np.array([closed_radii(spec, t) for t in t_grid])
    elif method == "rk4":
        radii = _rk4_radii(spec, t_grid, dt)
    else:
        raise ValueError(f"unknown method {method!r}")
    states = [exact_state(spec, r) for r in radii]
    return ExactTrajectory(spec, t_grid, radii, states, T, method)


@dataclass
class DiagnosticSeries:
    """Per-time pinching quantities along a trajectory, plus monotonicity flags."""

    times: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    lambda1_over_H: np.ndarray
    f: np.ndarray              # NaN where W <= 0
    f_sigma: np.ndarray
    codim_ratio: np.ndarray
    typeI_quantity: np.ndarray
    q_sign_preserved: bool
    codim_ratio_monotone: bool
    reports: list


def flow_diagnostics(traj: ExactTrajectory, params: PinchingParams) -> DiagnosticSeries:
    """Evaluate the pointwise pinching report along the trajectory."""
    T = len(traj.times)
    Q = np.empty(T); W = np.empty(T); l1H = np.empty(T)
    f = np.full(T, np.nan); fs = np.full(T, np.nan)
    ratio = np.empty(T); type1 = np.empty(T)
    reports = []
    for i, state in enumerate(traj.states):
        rep = pinching_report(state, params)
        reports.append(rep)
        Q[i] = rep.Q
        W[i] = rep.W
        l1H[i] = rep.lam[0] / np.sqrt(rep.normH2)
        if rep.f is not None:
            f[i] = rep.f
            fs[i] = rep.f_sigma
        ratio[i] = rep.codim_ratio
        type1[i] = (traj.T_sing - traj.times[i]) * rep.normA2
    q_pres = bool(Q[0] > 0.0 or np.all(Q <= 1e-10))
    mono = bool(np.all(ratio[1:] <= ratio[:-1] * (1.0 + 1e-10)))
    return DiagnosticSeries(traj.times, Q, W, l1H, f, fs, ratio, type1, q_pres, mono, reports)


def largest_monotone_eta(traj: ExactTrajectory, etas, rel_tol=1e-10):
    """Largest eta in the candidate list for which |Ahat|^2 / |H|^(2-2eta) is
    non-increasing along the trajectory; None if no candidate is monotone."""
    ahat2 = []
    normH = []
    for state in traj.states:
        dec = decompose(state)
        ahat2.append(dec.normAhat2)
        normH.append(dec.H1)
    ahat2 = np.array(ahat2)
    normH = np.array(normH)
    best = None
    for eta in sorted(etas):
        series = ahat2 / normH ** (2.0 - 2.0 * eta)
        if np.all(series[1:] <= series[:-1] * (1.0 + rel_tol)):
            best = eta
    return best


def trajectory_csv(traj: ExactTrajectory, diag: DiagnosticSeries, path, timestamp=True):
    """One row per time sample, 17 significant digits, single header row."""
    names = traj.spec.radii_names()
    cols = ["t", *names, "Q", "W", "lambda1_over_H", "f", "f_sigma",
            "codim_ratio", "typeI_quantity"]
    with open(path, "w") as fh:
        if timestamp:
            import datetime

            fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(len(traj.times)):
            row = [traj.times[i], *traj.radii[i], diag.Q[i], diag.W[i],
                   diag.lambda1_over_H[i], diag.f[i], diag.f_sigma[i],
                   diag.codim_ratio[i], diag.typeI_quantity[i]]
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

"""Seeded samplers for pinched curvature data and gradient tensors, plus the
verification harness that sweeps each named inequality over large sample sets.

Reproducibility contract: sample index i is generated from its own
counter-based stream Philox(key=[seed, i]), so serial and chunk-parallel runs
produce bitwise-identical streams and reports.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .curvature import CurvatureData, Dims, PinchingParams, decompose, eigenvalues, pinching_report
from .errors import InfeasibleParams, UnknownProperty
from .reaction import GradientTensor, simons_E

CHUNK = 4096

# fixed sampler constants, disclosed in every report header
SAMPLER_NOTES = (
    "per-sample Philox streams key=[seed,index]; pinched sampler: ahat/h ratio "
    "U[0,0.3), trace growth x1.2 per step (max 1000, safety 0.999), scale slack "
    "U[1.01,2.0), target |H| log-uniform over scale_range; margins normalized "
    "by (1+|lhs|)"
)

PROPERTY_IDS = (
    "poincare_identity",
    "gradient_ineq",
    "pinch_reaction",
    "simons_codim1_exact",
    "simons_lower_bound_fitC",
    "pythagoras",
    "frame_invariance",
    "coefficient_signs",
)


@dataclass(frozen=True)
class SampleSpec:
    """What to sample: dimensions, pinching parameters, count, seed, |H| range."""

    dims: Dims
    params: PinchingParams | None
    count: int
    seed: int
    scale_range: tuple = (0.5, 50.0)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ValueError("scale_range must be positive and ordered")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")


@dataclass
class VerificationReport:
    """Outcome of sweeping one property over a sample set."""

    property_id: str
    samples: int
    seed: int
    tol: float
    worst_margin: float
    violations: list = field(default_factory=list)  # (sample index, margin), ascending margin
    fitted_constant: float | None = None
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)


def _per_sample_draws(seed, start, stop, n_normal, n_uniform):
    """Fixed-layout draws for samples [start, stop), one Philox stream each."""
    B = stop - start
    normals = np.empty((B, n_normal))
    uniforms = np.empty((B, n_uniform)) if n_uniform else np.empty((B, 0))
    for j in range(B):
        g = np.random.Generator(np.random.Philox(key=[seed, start + j]))
        normals[j] = g.standard_normal(n_normal)
        if n_uniform:
            uniforms[j] = g.random(n_uniform)
    return normals, uniforms


def _sym_tangent(batch):
    return (batch + batch.transpose(0, 2, 1)) / 2.0


def _pinched_chunk(spec: SampleSpec, start, stop):
    """Arrays (B, n, n, k) of pinched second fundamental forms, Q <= 0 strict."""
    n, k = spec.dims.n, spec.dims.k
    params = spec.params
    c, a = params.c, params.a
    if c <= 1.0 / n:
        raise InfeasibleParams(f"pinched data with a > 0 needs c > 1/n = {1.0 / n}")
    B = stop - start
    normals, uniforms = _per_sample_draws(spec.seed, start, stop, n * n * k, 4)
    eye = np.eye(n)

    h = _sym_tangent(normals[:, : n * n].reshape(B, n, n))
    trh = np.einsum("bii->b", h)
    flip = np.where(trh < 0, -1.0, 1.0)
    h *= flip[:, None, None]
    trh *= flip
    small = trh < 1e-8
    if small.any():
        h[small] += eye
        trh = np.einsum("bii->b", h)

    if k > 1:
        ahat = normals[:, n * n :].reshape(B, n, n, k - 1)
        ahat = (ahat + ahat.transpose(0, 2, 1, 3)) / 2.0
        tr_ah = np.einsum("biia->ba", ahat)
        ahat -= tr_ah[:, None, None, :] / n * eye[None, :, :, None]
        rho = 0.3 * uniforms[:, 0]
        hn = np.sqrt(np.einsum("bij,bij->b", h, h))
        an = np.sqrt(np.einsum("bija,bija->b", ahat, ahat))
        fac = np.where(an > 0, rho * hn / np.where(an > 0, an, 1.0), 0.0)
        ahat *= fac[:, None, None, None]
    else:
        ahat = np.zeros((B, n, n, 0))

    hring = h - (trh / n)[:, None, None] * eye
    rest = np.einsum("bij,bij->b", hring, hring) + np.einsum("bija,bija->b", ahat, ahat)
    target = (c - 1.0 / n) * 0.999
    gam = np.ones(B)
    for _ in range(1000):
        bad = rest >= target * (gam * trh) ** 2
        if not bad.any():
            break
        gam[bad] *= 1.2
    else:
        raise RuntimeError("pinched sampler: trace adjustment failed after 1000 steps")
    trh = gam * trh
    h = hring + (trh / n)[:, None, None] * eye

    normA2 = np.einsum("bij,bij->b", h, h) + np.einsum("bija,bija->b", ahat, ahat)
    t_min = np.sqrt(a / (c * trh ** 2 - normA2))
    slack = 1.01 + 0.99 * uniforms[:, 1]
    lo, hi = spec.scale_range
    target_H = np.exp(np.log(lo) + uniforms[:, 2] * (np.log(hi) - np.log(lo)))
    t = np.maximum(t_min * slack, target_H / trh)

    A = np.zeros((B, n, n, k))
    A[..., 0] = t[:, None, None] * h
    if k > 1:
        A[..., 1:] = t[:, None, None, None] * ahat
    return A


def _generic_chunk(dims: Dims, scale_range, seed, start, stop, rotations=False):
    """Arrays (B, n, n, k) of generic data with |H| set to a log-uniform target.

    With rotations=True also returns per-sample orthogonal (n, n) and (k, k)
    matrices drawn from the same streams.
    """
    n, k = dims.n, dims.k
    B = stop - start
    extra = (n * n + k * k) if rotations else 0
    normals, uniforms = _per_sample_draws(seed, start, stop, n * n * k + extra, 1)

    A = normals[:, : n * n * k].reshape(B, n, n, k)
    A = (A + A.transpose(0, 2, 1, 3)) / 2.0
    H = np.einsum("biia->ba", A)
    normH = np.sqrt(np.einsum("ba,ba->b", H, H))
    weak = normH < 0.5
    if weak.any():
        A[weak, :, :, 0] += np.eye(n)
        H = np.einsum("biia->ba", A)
        normH = np.sqrt(np.einsum("ba,ba->b", H, H))
    lo, hi = scale_range
    target_H = np.exp(np.log(lo) + uniforms[:, 0] * (np.log(hi) - np.log(lo)))
    A *= (target_H / normH)[:, None, None, None]

    if not rotations:
        return A
    base = n * n * k
    rot_t = _orthogonalize(normals[:, base : base + n * n].reshape(B, n, n))
    rot_n = _orthogonalize(normals[:, base + n * n :].reshape(B, k, k))
    return A, rot_t, rot_n


def _orthogonalize(mats):
    """Deterministic batched QR orthogonalization (signs fixed by R diagonal)."""
    q, r = np.linalg.qr(mats)
    sign = np.sign(np.einsum("bii->bi", r))
    sign[sign == 0] = 1.0
    return q * sign[:, None, :]


def _codazzi_chunk(dims: Dims, seed, start, stop):
    """Arrays (B, n, n, n, k) symmetrized over the six tangent-slot permutations."""
    n, k = dims.n, dims.k
    B = stop - start
    normals, _ = _per_sample_draws(seed, start, stop, n * n * n * k, 0)
    S = normals.reshape(B, n, n, n, k)
    out = np.zeros_like(S)
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        out += S.transpose(0, 1 + perm[0], 1 + perm[1], 1 + perm[2], 4)
    return out / 6.0


def sample_pinched(spec: SampleSpec):
    """Pinched CurvatureData samples; every output satisfies Q <= 0 and |H| > 0."""
    if spec.params is None:
        raise ValueError("sample_pinched needs PinchingParams in the spec")
    out = []
    for start in range(0, spec.count, CHUNK):
        stop = min(start + CHUNK, spec.count)
        arrays = _pinched_chunk(spec, start, stop)
        for A in arrays:
            out.append(CurvatureData.from_tensor(A))
    return out


def sample_codazzi(dims: Dims, count, seed):
    """Fully tangent-symmetric GradientTensor samples."""
    out = []
    for start in range(0, count, CHUNK):
        stop = min(start + CHUNK, count)
        arrays = _codazzi_chunk(dims, seed, start, stop)
        for S in arrays:
            out.append(GradientTensor(dims, S))
    return out


# ---------------------------------------------------------------------------
# per-chunk margin evaluators; each returns (margins, fitted or None)

def _margins_pinch_reaction(spec, start, stop):
    A = _pinched_chunk(spec, start, stop)
    normA2, normH2, normh2, dA2, dH2 = backend.kernels().pinch_quantities(A)
    p = spec.params
    n = spec.dims.n
    c, a = p.c, p.a
    Q = normA2 - c * normH2 + a
    ahat2 = normA2 - normh2
    hring2 = normh2 - normH2 / n
    cc = 1.0 / (c - 1.0 / n)
    rhs = (
        2.0 * normh2 * Q - 2.0 * a * normh2 - (2.0 * a / n) * cc * ahat2
        + (2.0 / n) * cc * ahat2 * Q
        + (6.0 - 2.0 * cc / n) * hring2 * ahat2
        + (3.0 - 2.0 * cc / n) * ahat2 ** 2
    )
    lhs = dA2 - c * dH2
    return (rhs - lhs) / (1.0 + np.abs(lhs)), None


def _margins_gradient(spec, start, stop):
    S = _codazzi_chunk(spec.dims, spec.seed, start, stop)
    normS2, normdH2 = backend.kernels().gradient_quantities(S)
    margin = normS2 - 3.0 / (spec.dims.n + 2) * normdH2
    return margin / (1.0 + normS2), None


def _margins_poincare(spec, start, stop):
    n = spec.dims.n
    B = stop - start
    normals, uniforms = _per_sample_draws(spec.seed, start, stop, n * n, 1)
    M = _sym_tangent(normals.reshape(B, n, n))
    lo, hi = spec.scale_range
    scale = np.exp(np.log(lo) + uniforms[:, 0] * (np.log(hi) - np.log(lo)))
    M *= scale[:, None, None]
    M2 = M @ M
    term = np.einsum("bij,bij->b", M, M) * np.einsum("bii->b", M2 @ M2)
    lhs = term - np.einsum("bii->b", M2 @ M) ** 2
    mu = np.linalg.eigvalsh(M)
    d = mu[:, :, None] - mu[:, None, :]
    rhs = 0.5 * (mu[:, :, None] ** 2 * mu[:, None, :] ** 2 * d ** 2).sum(axis=(1, 2))
    # both sides are differences of |B|^6-sized terms, so "relative" has to
    # mean relative to the term size: the cancellation roundoff floor is
    # eps * term, unreachable by any normalization against lhs alone
    return -np.abs(lhs - rhs) / (1.0 + np.abs(lhs) + term), None


def _margins_pythagoras(spec, start, stop):
    A = _generic_chunk(spec.dims, spec.scale_range, spec.seed, start, stop)
    normA2, _, normh2, _, _ = backend.kernels().pinch_quantities(A)
    ahat2 = _direct_ahat2(A)
    return -np.abs(normA2 - (normh2 + ahat2)) / (1.0 + normA2), None


def _direct_ahat2(A):
    """|Ahat|^2 by explicit projection, independent of the Pythagoras shortcut."""
    H = np.einsum("biia->ba", A)
    normH = np.sqrt(np.einsum("ba,ba->b", H, H))
    nu1 = H / normH[:, None]
    h = np.einsum("bija,ba->bij", A, nu1)
    Ahat = A - h[:, :, :, None] * nu1[:, None, None, :]
    return np.einsum("bija,bija->b", Ahat, Ahat)


def _margins_simons_codim1(spec, start, stop):
    dims = Dims(spec.dims.n, 1)
    A = _generic_chunk(dims, spec.scale_range, spec.seed, start, stop)
    normE2, lower, term = _simons_scalars(A, with_term=True)
    # the eigenvalue bound is itself a difference of |A|^6-sized terms; near
    # umbilic data its roundoff floor is eps * term (see _margins_poincare)
    return -np.abs(normE2 - lower) / (1.0 + np.abs(normE2) + term), None


def _simons_scalars(A, with_term=False):
    R = np.einsum("bipa,bjpc->bijac", A, A)
    R = R - R.transpose(0, 2, 1, 3, 4)
    U = 2.0 * np.einsum("bklc,bipc,bjpa->bklija", A, A, A) \
        - 2.0 * np.einsum("bijc,bkpc,blpa->bklija", A, A, A)
    V = (
        np.einsum("bklc,bijac->bklija", A, R)
        - np.einsum("bijc,bklac->bklija", A, R)
        + np.einsum("bjlc,bkiac->bklija", A, R)
        + np.einsum("bjkc,bliac->bklija", A, R)
        + np.einsum("bikc,bljac->bklija", A, R)
        + np.einsum("bilc,bkjac->bklija", A, R)
    )
    E = U + V
    normE2 = np.einsum("bklija,bklija->b", E, E)
    H = np.einsum("biia->ba", A)
    normH = np.sqrt(np.einsum("ba,ba->b", H, H))
    nu1 = H / normH[:, None]
    h = np.einsum("bija,ba->bij", A, nu1)
    h2 = h @ h
    term = 8.0 * np.einsum("bij,bij->b", h, h) * np.einsum("bii->b", h2 @ h2)
    lower = term - 8.0 * np.einsum("bii->b", h2 @ h) ** 2
    if with_term:
        return normE2, lower, term
    return normE2, lower


def _margins_simons_fitC(spec, start, stop):
    A = _generic_chunk(spec.dims, spec.scale_range, spec.seed, start, stop)
    normE2, lower = _simons_scalars(A)
    normA2 = np.einsum("bija,bija->b", A, A)
    ahat2 = _direct_ahat2(A)
    denom = normA2 ** 2.5 * np.sqrt(ahat2)
    ratio = np.where(denom > 0, (lower - normE2) / np.where(denom > 0, denom, 1.0), 0.0)
    fitted = float(max(ratio.max(), 0.0))
    margins = (normE2 - lower) / (1.0 + np.abs(normE2))
    return margins, fitted


def _margins_frame_invariance(spec, start, stop):
    params = spec.params or PinchingParams.default_for(spec.dims.n)
    A, rot_t, rot_n = _generic_chunk(
        spec.dims, spec.scale_range, spec.seed, start, stop, rotations=True
    )
    A2 = np.einsum("bim,bjn,bca,bmna->bijc", rot_t, rot_t, rot_n, A)
    margins = np.empty(stop - start)
    for j in range(stop - start):
        r1 = pinching_report(CurvatureData.from_tensor(A[j]), params)
        r2 = pinching_report(CurvatureData.from_tensor(A2[j]), params)
        devs = [
            _reldev(r1.normA2, r2.normA2),
            _reldev(np.sqrt(r1.normH2), np.sqrt(r2.normH2)),
            _reldev(r1.normAhat2, r2.normAhat2),
            _reldev(r1.Q, r2.Q),
            _reldev(r1.W, r2.W),
            _reldev(r1.v, r2.v),
            _reldev(r1.codim_ratio, r2.codim_ratio),
            float(np.max(np.abs(r1.lam - r2.lam)) / (1.0 + np.max(np.abs(r1.lam)))),
        ]
        if r1.f is not None and r2.f is not None:
            devs.append(_reldev(r1.f, r2.f))
            devs.append(_reldev(r1.f_sigma, r2.f_sigma))
        margins[j] = -max(devs)
    return margins, None


def _reldev(x, y):
    return abs(x - y) / (1.0 + abs(x))


def _margins_coefficient_signs(spec, start, stop):
    """Grid scan: both reaction coefficients stay nonpositive across the c-range."""
    margins = np.empty(stop - start)
    idx = 0
    for i in range(start, stop):
        n = 5 + (i % 8)                      # n in 5..12
        j = i // 8
        npts = max(1, (spec.count + 7) // 8)
        frac = (j + 0.5) / npts
        lo = 1.0 / n + 1e-4
        hi = 4.0 / (3.0 * n) - 1e-4
        c = lo + frac * (hi - lo)
        x = 2.0 / (n * (c - 1.0 / n))
        margins[idx] = -max(6.0 - x, 3.0 - x)
        idx += 1
    return margins, None


_PROPERTY_FUNCS = {
    "poincare_identity": _margins_poincare,
    "gradient_ineq": _margins_gradient,
    "pinch_reaction": _margins_pinch_reaction,
    "simons_codim1_exact": _margins_simons_codim1,
    "simons_lower_bound_fitC": _margins_simons_fitC,
    "pythagoras": _margins_pythagoras,
    "frame_invariance": _margins_frame_invariance,
    "coefficient_signs": _margins_coefficient_signs,
}


def verify_property(property_id: str, spec: SampleSpec, tol: float) -> VerificationReport:
    """Sweep one named inequality/identity over the sample set described by spec.

    Chunks of samples are evaluated in parallel (PINCHFLOW_THREADS caps the
    workers); the merge is by ascending chunk index, so reports are
    reproducible bit for bit regardless of the worker count.
    """
    if property_id not in _PROPERTY_FUNCS:
        raise UnknownProperty(f"{property_id!r}; known: {', '.join(PROPERTY_IDS)}")
    if property_id == "pinch_reaction" and spec.params is None:
        raise ValueError("pinch_reaction needs PinchingParams in the spec")
    func = _PROPERTY_FUNCS[property_id]
    t0 = time.perf_counter()
    ranges = [(s, min(s + CHUNK, spec.count)) for s in range(0, spec.count, CHUNK)]
    workers = backend.thread_count()
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: func(spec, r[0], r[1]), ranges))
    else:
        results = [func(spec, a, b) for a, b in ranges]

    violations = []
    worst = np.inf
    fitted = None
    for (startstop, (margins, fit)) in zip(ranges, results):
        start = startstop[0]
        worst = min(worst, float(margins.min()))
        bad = np.nonzero(margins < -tol)[0]
        for b in bad:
            violations.append((int(start + b), float(margins[b])))
        if fit is not None:
            fitted = fit if fitted is None else max(fitted, fit)
    violations.sort(key=lambda v: v[1])
    wall = time.perf_counter() - t0

    cfg = {"n": spec.dims.n, "k": spec.dims.k, "scale_range": spec.scale_range}
    if spec.params is not None:
        p = spec.params
        cfg["params"] = dict(c=p.c, a=p.a, eps0=p.eps0, eps=p.eps, Lambda=p.Lambda,
                             sigma=p.sigma, eta=p.eta, Lmax=p.Lmax)
    return VerificationReport(
        property_id=property_id, samples=spec.count, seed=spec.seed, tol=tol,
        worst_margin=worst, violations=violations, fitted_constant=fitted,
        wall_time=wall, config=cfg,
    )


def format_report(report: VerificationReport) -> str:
    """Serialize a report as a plain structured-text record."""
    lines = [
        "# pinchflow verification report",
        f"# {SAMPLER_NOTES}",
        f"property: {report.property_id}",
        f"samples: {report.samples}",
        f"seed: {report.seed}",
        f"tol: {report.tol:.17g}",
        f"n: {report.config.get('n', '-')}",
        f"k: {report.config.get('k', '-')}",
        f"scale_range: {report.config.get('scale_range', '-')}",
    ]
    params = report.config.get("params")
    if params:
        lines.append("params: " + ",".join(f"{k}={v:.17g}" for k, v in params.items()))
    lines.append(f"worst_margin: {report.worst_margin:.17g}")
    if report.fitted_constant is None:
        lines.append("fitted_constant: none")
    else:
        lines.append(f"fitted_constant: {report.fitted_constant:.17g}")
    lines.append(f"wall_time_s: {report.wall_time:.3f}")
    lines.append(f"violations: {len(report.violations)}")
    for idx, margin in report.violations:
        lines.append(f"violation: {idx} {margin:.17g}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Parse the structured-text record back into a dict (inverse of format_report)."""
    out = {"violations": []}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if key == "violation":
            idx, margin = value.split()
            out["violations"].append((int(idx), float(margin)))
        elif key in ("samples", "seed"):
            out[key] = int(value)
        elif key in ("tol", "worst_margin", "wall_time_s"):
            out[key] = float(value)
        elif key == "fitted_constant":
            out[key] = None if value == "none" else float(value)
        elif key == "violations":
            out["violation_count"] = int(value)
        else:
            out[key] = value
    return out

"""Pointwise curvature algebra for immersed submanifolds of codimension k.

Everything here works on the components of the second fundamental form A
(shape (n, n, k), symmetric in the tangent slots) and the mean curvature
vector H (shape (k,)) expressed in orthonormal tangent and normal frames.
Consumers holding data in a non-orthonormal frame must orthonormalize first.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooSmall, ZeroMeanCurvature

# |H| below this is treated as zero mean curvature (configurable per call)
H_FLOOR = 1e-14


@dataclass(frozen=True)
class Dims:
    """Intrinsic dimension n >= 2 and codimension k >= 1."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"intrinsic dimension must be >= 2, got {self.n}")
        if self.k < 1:
            raise ValueError(f"codimension must be >= 1, got {self.k}")


@dataclass(frozen=True)
class CurvatureData:
    """Second fundamental form and mean curvature vector at one point.

    A is indexed (i, j, alpha); H is the trace of A over the tangent slots.
    Construction validates the tangent symmetry and the trace identity.
    """

    dims: Dims
    A: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        A = np.asarray(self.A, dtype=np.float64)
        H = np.asarray(self.H, dtype=np.float64)
        if A.shape != (n, n, k):
            raise ValueError(f"A must have shape {(n, n, k)}, got {A.shape}")
        if H.shape != (k,):
            raise ValueError(f"H must have shape {(k,)}, got {H.shape}")
        scale = np.abs(A).max() if A.size else 0.0
        if scale > 0 and np.abs(A - A.transpose(1, 0, 2)).max() > 1e-12 * scale:
            raise ValueError("A is not symmetric in its tangent slots")
        trace = np.einsum("iia->a", A)
        href = max(np.linalg.norm(trace), np.linalg.norm(H), 1.0)
        if np.linalg.norm(trace - H) > 1e-12 * href:
            raise ValueError("H does not match the trace of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "H", H)

    @classmethod
    def from_tensor(cls, A):
        """Build CurvatureData from the A-tensor alone, deriving H and dims."""
        A = np.asarray(A, dtype=np.float64)
        n, _, k = A.shape
        return cls(Dims(n, k), A, np.einsum("iia->a", A))

    def norm_H(self):
        return float(np.linalg.norm(self.H))

    def norm_A2(self):
        return float(np.einsum("ija,ija->", self.A, self.A))


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Split A = h nu1 + Ahat along the principal normal nu1 = H/|H|."""

    nu1: np.ndarray       # unit k-vector
    h: np.ndarray         # symmetric n x n, <A_ij, nu1>
    Ahat: np.ndarray      # (n, n, k), orthogonal to nu1
    normA2: float
    normh2: float
    normAhat2: float
    H1: float             # |H|


@dataclass(frozen=True)
class PinchingParams:
    """Constants of the pinching condition and the derived quantities.

    c must satisfy 1/n < c < 4/(3n) and c <= 4/(3n) - eps0; a, eps, Lambda,
    sigma, eta, Lmax are positive (sigma and eta in (0,1)).
    """

    n: int
    c: float
    a: float
    eps0: float
    eps: float = 0.1
    Lambda: float = 1.0
    sigma: float = 0.1
    eta: float = 0.01
    Lmax: float = 1.0

    def __post_init__(self):
        n = self.n
        if n < 2:
            raise ValueError("n must be >= 2")
        if not (self.c > 1.0 / n):
            raise ValueError(f"need c > 1/n = {1.0 / n}, got c = {self.c}")
        if not (self.c < 4.0 / (3.0 * n)):
            raise ValueError(f"need c < 4/(3n) = {4.0 / (3.0 * n)}, got c = {self.c}")
        if self.eps0 <= 0 or 4.0 / (3.0 * n) - self.eps0 < self.c:
            raise ValueError("need 0 < eps0 <= 4/(3n) - c")
        for name in ("a", "eps", "Lambda", "sigma", "eta", "Lmax"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.sigma < 1):
            raise ValueError("sigma must lie in (0,1)")
        if not (0 < self.eta < 1):
            raise ValueError("eta must lie in (0,1)")

    @classmethod
    def default_for(cls, n, **overrides):
        """Valid defaults: c halfway between 1/n and 4/(3n), eps0 half the slack."""
        c = overrides.pop("c", 7.0 / (6.0 * n))
        a = overrides.pop("a", 0.1)
        eps0 = overrides.pop("eps0", (4.0 / (3.0 * n) - c) / 2.0)
        return cls(n=n, c=c, a=a, eps0=eps0, **overrides)


@dataclass(frozen=True)
class PinchingReport:
    """All pointwise pinching quantities for one CurvatureData and one parameter set.

    w, f and f_sigma are None when W <= 0 (w is only guaranteed real under
    pinching); `pinched` records Q <= 0.
    """

    Q: float
    W: float
    w: float | None
    v: float
    lam: np.ndarray            # eigenvalues of h, ascending
    f: float | None
    f_sigma: float | None
    codim_ratio: float
    pinched: bool
    normA2: float = field(default=0.0, repr=False)
    normH2: float = field(default=0.0, repr=False)
    normh2: float = field(default=0.0, repr=False)
    normAhat2: float = field(default=0.0, repr=False)


def decompose(data: CurvatureData, floor: float = H_FLOOR) -> PrincipalDecomposition:
    """Decompose A into its principal-normal part h nu1 and the rest Ahat."""
    H1 = data.norm_H()
    if H1 <= floor:
        raise ZeroMeanCurvature(f"|H| = {H1} is below the floor {floor}")
    nu1 = data.H / H1
    h = np.einsum("ija,a->ij", data.A, nu1)
    Ahat = data.A - h[:, :, None] * nu1[None, None, :]
    normA2 = data.norm_A2()
    normh2 = float(np.einsum("ij,ij->", h, h))
    normAhat2 = float(np.einsum("ija,ija->", Ahat, Ahat))
    return PrincipalDecomposition(nu1, h, Ahat, normA2, normh2, normAhat2, H1)


def eigenvalues(h) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix (LAPACK, deterministic order)."""
    return np.linalg.eigvalsh(np.asarray(h, dtype=np.float64))


def pinching_report(data: CurvatureData, params: PinchingParams,
                    floor: float = H_FLOOR) -> PinchingReport:
    """Evaluate Q, W, w, v, the eigenvalues of h, f, f_sigma and the codimension ratio."""
    dec = decompose(data, floor=floor)
    n = data.dims.n
    normH2 = dec.H1 * dec.H1
    Q = dec.normA2 - params.c * normH2 + params.a
    W = (4.0 / (3.0 * n) - params.eps0 / 2.0) * normH2 - dec.normA2
    lam = eigenvalues(dec.h)
    v = dec.normAhat2 / dec.H1
    codim_ratio = dec.normAhat2 / dec.H1 ** (2.0 - 2.0 * params.eta)
    if W > 0.0:
        w = float(np.sqrt(W))
        f = -lam[0] - params.eps * w + params.Lambda * v
        f_sigma = f / dec.H1 ** (1.0 - params.sigma)
    else:
        w = f = f_sigma = None
    return PinchingReport(
        Q=Q, W=W, w=w, v=v, lam=lam, f=f, f_sigma=f_sigma,
        codim_ratio=codim_ratio, pinched=bool(Q <= 0.0),
        normA2=dec.normA2, normH2=normH2, normh2=dec.normh2,
        normAhat2=dec.normAhat2,
    )


def constants(n: int, eps0: float):
    """Named constants of the estimate machinery for dimension n.

    Returns a dict with the sharp pinching threshold c_n (needs n >= 5), the
    gradient-absorption constant delta0 = (sqrt(3n)/2) ((n+2)/6) eps0, and the
    trace-gradient coefficient 3/(n+2).
    """
    if n < 5:
        raise DimensionTooSmall(f"the sharp pinching constant requires n >= 5, got {n}")
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if n in (5, 6, 7):
        c_n = 3.0 * (n + 1) / (2.0 * n * (n + 2))
    else:
        c_n = 4.0 / (3.0 * n)
    delta0 = (np.sqrt(3.0 * n) / 2.0) * ((n + 2) / 6.0) * eps0
    return {"c_n": c_n, "delta0": delta0, "grad_coeff": 3.0 / (n + 2)}


def lambda_for(eps: float, delta0: float, C: float = 1.0) -> float:
    """Weight Lambda = C / (2 eps delta0) that kills the Ahat-gradient term.

    The dimensional constant C is not pinned down by the estimates; C = 1 is a
    placeholder surrogate and callers should treat Lambda as a free parameter.
    """
    return C / (2.0 * eps * delta0)


@dataclass(frozen=True)
class NormalCurvature:
    Rperp: np.ndarray   # (n, n, k, k)
    norm2: float


def normal_curvature(data: CurvatureData) -> NormalCurvature:
    """Normal-bundle curvature R^perp_{ij ab} = A_{ipa} A_{jpb} - A_{jpa} A_{ipb}."""
    A = data.A
    R = np.einsum("ipa,jpb->ijab", A, A)
    Rperp = R - R.transpose(1, 0, 2, 3)
    return NormalCurvature(Rperp, float(np.einsum("ijab,ijab->", Rperp, Rperp)))


def complete_normal_frame(nu1: np.ndarray) -> np.ndarray:
    """Orthonormal basis of R^k whose first row is nu1.

    Gram-Schmidt over the ambient coordinate directions, always taking the
    direction with the largest remaining norm first, so the completion is
    deterministic.
    """
    nu1 = np.asarray(nu1, dtype=np.float64)
    k = nu1.shape[0]
    basis = [nu1 / np.linalg.norm(nu1)]
    residuals = np.eye(k)
    for b in basis:
        residuals -= np.outer(residuals @ b, b)
    while len(basis) < k:
        norms = np.linalg.norm(residuals, axis=1)
        pick = int(np.argmax(norms))
        vec = residuals[pick] / norms[pick]
        basis.append(vec)
        residuals -= np.outer(residuals @ vec, vec)
    return np.array(basis)

"""Zeroth-order reaction terms, the cubic commutator tensor of the
symmetrized second-derivative exchange identity, and the gradient
inequality pair.

All operations are pure contractions of pointwise data; nothing here knows
about a flow in time.
"""

from dataclasses import dataclass

import numpy as np

from .curvature import (
    CurvatureData,
    Dims,
    PinchingParams,
    PrincipalDecomposition,
    complete_normal_frame,
    decompose,
    eigenvalues,
    normal_curvature,
)
from .errors import NotCodazzi, NotPinched, ZeroMeanCurvature


@dataclass(frozen=True)
class ReactionValues:
    """Zeroth-order reaction terms of the |A|^2 and |H|^2 evolution equations."""

    dA2: float        # 2|<A,A>|^2 + 2|Rperp|^2
    dH2: float        # 2|<A,H>|^2
    dQ_exact: float   # dA2 - c * dH2


def reaction_zeroth(data: CurvatureData, c: float) -> ReactionValues:
    A, H = data.A, data.H
    M = np.einsum("ija,pqa->ijpq", A, A)
    s1 = float(np.einsum("ijpq,ijpq->", M, M))
    s2 = normal_curvature(data).norm2
    AH = np.einsum("ija,a->ij", A, H)
    dA2 = 2.0 * s1 + 2.0 * s2
    dH2 = 2.0 * float(np.einsum("ij,ij->", AH, AH))
    return ReactionValues(dA2, dH2, dA2 - c * dH2)


@dataclass(frozen=True)
class PinchBound:
    rhs: float     # zeroth-order bound valid where Q <= 0
    lhs: float     # exact reaction dQ_exact
    margin: float  # rhs - lhs, expected >= 0 on pinched data


def pinch_bound_rhs(data: CurvatureData, params: PinchingParams) -> PinchBound:
    """Zeroth-order bound on the reaction of Q = |A|^2 - c|H|^2 + a.

    Only valid at pinched points; raises NotPinched when Q > 0.
    """
    dec = decompose(data)
    n = data.dims.n
    c, a = params.c, params.a
    normH2 = dec.H1 * dec.H1
    Q = dec.normA2 - c * normH2 + a
    if Q > 0.0:
        raise NotPinched(f"Q = {Q} > 0; the bound requires quadratic pinching")
    cc = 1.0 / (c - 1.0 / n)
    hring2 = dec.normh2 - normH2 / n          # |h - (trace h / n) I|^2
    ahat2 = dec.normAhat2
    rhs = (
        2.0 * dec.normh2 * Q
        - 2.0 * a * dec.normh2
        - (2.0 * a / n) * cc * ahat2
        + (2.0 / n) * cc * ahat2 * Q
        + (6.0 - 2.0 * cc / n) * hring2 * ahat2
        + (3.0 - 2.0 * cc / n) * ahat2 * ahat2
    )
    lhs = reaction_zeroth(data, c).dQ_exact
    return PinchBound(rhs, lhs, rhs - lhs)


def T_tensor(decomp: PrincipalDecomposition) -> np.ndarray:
    """Cubic coupling of Ahat with h, summed over the normal directions
    orthogonal to the principal normal.

    The normal frame is the deterministic completion of nu1; the frame only
    orders the summation, the output does not depend on it.
    """
    frame = complete_normal_frame(decomp.nu1)
    B = np.einsum("ija,ba->ijb", decomp.Ahat, frame)[:, :, 1:]
    h = decomp.h
    T = (
        2.0 * np.einsum("ijb,pqb,pq->ij", B, B, h)
        + np.einsum("ipb,pqb,qj->ij", B, B, h)
        + np.einsum("jpb,pqb,qi->ij", B, B, h)
        - 2.0 * np.einsum("ipb,jqb,pq->ij", B, B, h)
    )
    return T


@dataclass(frozen=True)
class SimonsTensors:
    """Cubic exchange tensor E with its pure-cubic / normal-curvature split.

    E = U + V entrywise; in codimension one V vanishes and |E|^2 equals the
    eigenvalue lower bound exactly.
    """

    E: np.ndarray             # (n, n, n, n, k), indexed (k, l, i, j, alpha)
    U: np.ndarray
    V: np.ndarray
    normE2: float
    lower_bound: float | None   # 8|h|^2 tr(h^4) - 8 tr(h^3)^2; None without |H| > 0
    deficit: float | None       # normE2 - lower_bound


def simons_E(data: CurvatureData, bound: bool = True) -> SimonsTensors:
    A = data.A
    R = normal_curvature(data).Rperp
    U = 2.0 * np.einsum("klb,ipb,jpa->klija", A, A, A) \
        - 2.0 * np.einsum("ijb,kpb,lpa->klija", A, A, A)
    V = (
        np.einsum("klb,ijab->klija", A, R)
        - np.einsum("ijb,klab->klija", A, R)
        + np.einsum("jlb,kiab->klija", A, R)
        + np.einsum("jkb,liab->klija", A, R)
        + np.einsum("ikb,ljab->klija", A, R)
        + np.einsum("ilb,kjab->klija", A, R)
    )
    E = U + V
    normE2 = float(np.einsum("klija,klija->", E, E))
    lower = deficit = None
    if bound:
        dec = decompose(data)   # raises ZeroMeanCurvature when undefined
        h = dec.h
        h2 = h @ h
        lower = 8.0 * dec.normh2 * float(np.trace(h2 @ h2)) - 8.0 * float(np.trace(h2 @ h)) ** 2
        deficit = normE2 - lower
    return SimonsTensors(E, U, V, normE2, lower, deficit)


def simons_E_symmetrized(data: CurvatureData) -> np.ndarray:
    """Twelve-term assembly of E straight from the symmetrized exchange identity.

    Independent of the U + V route; used as its cross-check.
    """
    A = data.A
    terms = [
        (+1, "klb,ipb,jpa"), (+1, "klb,jpb,ipa"),
        (-1, "ijb,kpb,lpa"), (-1, "ijb,lpb,kpa"),
        (+1, "jlb,ipb,kpa"), (+1, "ikb,jpb,lpa"),
        (+1, "jkb,ipb,lpa"), (+1, "ilb,jpb,kpa"),
        (-1, "ilb,kpb,jpa"), (-1, "jkb,lpb,ipa"),
        (-1, "jlb,kpb,ipa"), (-1, "ikb,lpb,jpa"),
    ]
    E = np.zeros_like(np.einsum("klb,ipb,jpa->klija", A, A, A))
    for sign, sub in terms:
        E += sign * np.einsum(sub + "->klija", A, A, A)
    return E


def poincare_identity(B):
    """Both sides of the eigenvalue identity
    |B|^2 tr(B^4) - tr(B^3)^2 = 1/2 sum_ij mu_i^2 mu_j^2 (mu_i - mu_j)^2.

    Returns (lhs, rhs); they agree for every symmetric B.
    """
    B = np.asarray(B, dtype=np.float64)
    B2 = B @ B
    lhs = float(np.einsum("ij,ij->", B, B)) * float(np.trace(B2 @ B2)) \
        - float(np.trace(B2 @ B)) ** 2
    mu = eigenvalues(B)
    d = mu[:, None] - mu[None, :]
    rhs = 0.5 * float((mu[:, None] ** 2 * mu[None, :] ** 2 * d ** 2).sum())
    return lhs, rhs


@dataclass(frozen=True)
class GradientTensor:
    """Sampled first-derivative tensor S_{ijp alpha}, fully symmetric in (i, j, p)."""

    dims: Dims
    S: np.ndarray

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        S = np.asarray(self.S, dtype=np.float64)
        if S.shape != (n, n, n, k):
            raise ValueError(f"S must have shape {(n, n, n, k)}, got {S.shape}")
        object.__setattr__(self, "S", S)

    def dH(self):
        """Trace over the first two tangent slots: the mean curvature gradient."""
        return np.einsum("iipa->pa", self.S)


@dataclass(frozen=True)
class GradientPair:
    normS2: float
    normdH2: float
    margin: float   # normS2 - 3/(n+2) * normdH2


def gradient_pair(S: GradientTensor) -> GradientPair:
    """Norms entering the trace-gradient inequality |S|^2 >= 3/(n+2) |tr S|^2."""
    arr = S.S
    scale = np.abs(arr).max()
    for axes in ((1, 0, 2, 3), (0, 2, 1, 3), (2, 1, 0, 3)):
        if np.abs(arr - arr.transpose(axes)).max() > 1e-12 * max(scale, 1.0):
            raise NotCodazzi("S is not symmetric in its tangent slots")
    normS2 = float(np.einsum("ijpa,ijpa->", arr, arr))
    dH = S.dH()
    normdH2 = float(np.einsum("pa,pa->", dH, dH))
    n = S.dims.n
    return GradientPair(normS2, normdH2, normS2 - 3.0 / (n + 2) * normdH2)

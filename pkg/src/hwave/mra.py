"""Weighted L2 structure on the splines and off-diagonal-decay matrix algebra.

Gram matrices are normalized by the ball volumes mu^k_alpha = mu(B(x^k_alpha,
delta^k)); their extreme eigenvalues are exactly the optimal Riesz constants.
Inverses and inverse square roots come from a symmetric eigendecomposition,
with an optional Neumann-series route kept for decay experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import NetHierarchy
from .space import FiniteSpace, SpaceConstants
from .splines import SplineTable

__all__ = [
    "GramLevel",
    "GramSystem",
    "DecayProfile",
    "NotSPDError",
    "gram_matrix",
    "riesz_bounds",
    "inverse_and_sqrt",
    "neumann_inverse_and_sqrt",
    "decay_fit",
    "fit_decay_exponent",
    "biorthogonal_and_orthonormal",
    "build_gram_system",
    "chain_constants",
    "separated_sum_check",
    "decay_exponent_s",
]


class NotSPDError(RuntimeError):
    """Matrix expected to be symmetric positive definite is not."""


BAND_COEFF = 16.0  # Gram entries vanish beyond 16 A0^6 delta^k


def decay_exponent_s(constants: SpaceConstants) -> float:
    """Exponent in the inverse-matrix decay: 1 for a metric, else (1+log2 A0)^-1."""
    if constants.A0 <= 1.0:
        return 1.0
    return 1.0 / (1.0 + math.log2(constants.A0))


def gram_matrix(space: FiniteSpace, constants: SpaceConstants, h: NetHierarchy,
                table: SplineTable, k: int):
    """Volume-normalized Gram matrix of the level-k splines, plus the volumes."""
    values = table.at(k)
    lev = h.level(k)
    dk = h.scale(k)
    vol = np.array([space.volume(int(x), dk) for x in lev])
    raw = space.gram(values, values)
    M = raw / np.sqrt(np.outer(vol, vol))
    M = 0.5 * (M + M.T)
    centers = space.dist[np.ix_(lev, lev)]
    far = centers >= BAND_COEFF * constants.A0**6 * dk
    if np.any(M[far] != 0.0):
        raise NotSPDError(f"band property violated at level {k}")
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] <= 0.0:
        raise NotSPDError(f"Gram at level {k} has eigenvalue {eigs[0]:.3e} <= 0")
    return M, vol


def riesz_bounds(M: np.ndarray) -> tuple[float, float]:
    """Extreme eigenvalues: the optimal two-sided Riesz constants."""
    eigs = np.linalg.eigvalsh(M)
    return float(eigs[0]), float(eigs[-1])


def inverse_and_sqrt(M: np.ndarray):
    """(M^-1, M^-1/2) by symmetric eigendecomposition."""
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, abs(M).max())):
        raise NotSPDError("matrix is not symmetric")
    eigs, U = np.linalg.eigh(M)
    if eigs[0] <= 0.0:
        raise NotSPDError(f"matrix has eigenvalue {eigs[0]:.3e} <= 0")
    inv = (U / eigs) @ U.T
    isqrt = (U / np.sqrt(eigs)) @ U.T
    return 0.5 * (inv + inv.T), 0.5 * (isqrt + isqrt.T)


def neumann_inverse_and_sqrt(M: np.ndarray, tol: float = 1e-13,
                             max_terms: int = 20000):
    """Series route: write M = h (I - A) and sum powers of A.

    Returns (inverse, inverse square root, contraction ratio r, #terms).
    The square-root series uses the central binomial coefficients, which are
    bounded by one, so both tails are controlled by r^(N+1) / (1 - r).
    """
    M = np.asarray(M, dtype=float)
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] <= 0.0:
        raise NotSPDError("Neumann route needs a positive definite matrix")
    norm_m = float(eigs[-1])
    norm_minv = 1.0 / float(eigs[0])
    hconst = 0.5 * (norm_m + norm_minv)
    n = M.shape[0]
    A = np.eye(n) - M / hconst
    r = float(np.abs(np.linalg.eigvalsh(A)).max())
    if r >= 1.0:
        raise NotSPDError("series does not contract")
    inv_sum = np.eye(n)
    sqrt_sum = np.eye(n)
    power = np.eye(n)
    c = 1.0
    terms = 0
    while r ** (terms + 1) / (1.0 - r) >= tol:
        power = power @ A
        c = c * (2 * terms + 1) / (2 * terms + 2)
        inv_sum += power
        sqrt_sum += c * power
        terms += 1
        if terms > max_terms:
            raise NotSPDError("series did not converge within the term budget")
    return inv_sum / hconst, sqrt_sum / math.sqrt(hconst), r, terms


@dataclass(frozen=True)
class DecayProfile:
    exponent: float       # s applied to the normalized distance
    C: float              # fitted amplitude
    gamma: float          # fitted decay rate (positive = decay)
    max_residual: float   # worst underestimate of ln|entry| by the fit
    n_entries: int
    degenerate: bool


def decay_fit(matrix: np.ndarray, center_ids, space: FiniteSpace, scale: float,
              exponent: float, floor: float = 1e-14) -> DecayProfile:
    """Least squares of ln|entry| against (d/scale)^exponent over live entries."""
    matrix = np.asarray(matrix, dtype=float)
    centers = np.asarray(center_ids, dtype=int)
    dists = space.dist[np.ix_(centers, centers)]
    live = np.abs(matrix) > floor
    if live.sum() < 2:
        raise ValueError("fewer than 2 entries above the floor")
    u = (dists[live] / scale) ** exponent
    v = np.log(np.abs(matrix[live]))
    if np.unique(u).size < 2:
        return DecayProfile(exponent=exponent, C=float(np.exp(v.max())),
                            gamma=0.0, max_residual=0.0,
                            n_entries=int(live.sum()), degenerate=True)
    design = np.stack([np.ones_like(u), -u], axis=1)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    lnC, gamma = float(coef[0]), float(coef[1])
    resid = v - design @ coef
    return DecayProfile(exponent=exponent, C=math.exp(lnC), gamma=gamma,
                        max_residual=float(resid.max()),
                        n_entries=int(live.sum()), degenerate=False)


def fit_decay_exponent(matrix: np.ndarray, dists: np.ndarray,
                       floor: float = 1e-14) -> float:
    """Slope of ln(-ln|entry|) against ln(distance): the decay exponent itself."""
    matrix = np.asarray(matrix, dtype=float)
    live = (np.abs(matrix) > floor) & (np.abs(matrix) < 1.0) & (dists > 0)
    if live.sum() < 2:
        raise ValueError("not enough entries to fit an exponent")
    x = np.log(dists[live])
    y = np.log(-np.log(np.abs(matrix[live])))
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def biorthogonal_and_orthonormal(space: FiniteSpace, table_values: np.ndarray,
                                 Minv: np.ndarray, Misqrt: np.ndarray,
                                 volumes: np.ndarray):
    """Dual splines and orthonormal scaling functions from the Gram algebra."""
    sqrt_vol = np.sqrt(volumes)
    stilde = (Minv / np.outer(sqrt_vol, sqrt_vol)) @ table_values
    phi = (Misqrt / sqrt_vol[None, :]) @ table_values
    return stilde, phi


@dataclass(frozen=True)
class GramLevel:
    k: int
    M: np.ndarray
    volumes: np.ndarray
    Minv: np.ndarray
    Misqrt: np.ndarray
    stilde: np.ndarray
    phi: np.ndarray
    riesz: tuple[float, float]


@dataclass(frozen=True)
class GramSystem:
    k_coarse: int
    k_fine: int
    levels: tuple

    def at(self, k: int) -> GramLevel:
        return self.levels[k - self.k_coarse]


def build_gram_system(space: FiniteSpace, constants: SpaceConstants,
                      h: NetHierarchy, table: SplineTable,
                      check_tol: float = 1e-10) -> GramSystem:
    """Gram, dual and orthonormal data per level, with identities asserted."""
    out = []
    for k in range(h.k_coarse, h.k_fine + 1):
        M, vol = gram_matrix(space, constants, h, table, k)
        Minv, Misqrt = inverse_and_sqrt(M)
        values = table.at(k)
        stilde, phi = biorthogonal_and_orthonormal(space, values, Minv, Misqrt, vol)
        bio = space.gram(values, stilde)
        err_bio = float(np.abs(bio - np.eye(values.shape[0])).max())
        ortho = space.gram(phi, phi)
        err_ortho = float(np.abs(ortho - np.eye(values.shape[0])).max())
        mass = stilde @ space.weights
        err_mass = float(np.abs(mass - 1.0).max())
        if max(err_bio, err_ortho, err_mass) > check_tol:
            raise NotSPDError(
                f"level {k} dual-system identities failed "
                f"(bio {err_bio:.2e}, ortho {err_ortho:.2e}, mass {err_mass:.2e})"
            )
        out.append(GramLevel(k=k, M=M, volumes=vol, Minv=Minv, Misqrt=Misqrt,
                             stilde=stilde, phi=phi, riesz=riesz_bounds(M)))
    return GramSystem(k_coarse=h.k_coarse, k_fine=h.k_fine, levels=tuple(out))


def _minplus(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.empty_like(A)
    for i in range(A.shape[0]):
        out[i] = (A[i][:, None] + B).min(axis=0)
    return out


def chain_constants(space: FiniteSpace, constants: SpaceConstants,
                    n_max: int) -> np.ndarray:
    """kappa_n: worst ratio of the direct distance to the best n-chain sum.

    Computed exactly by min-plus matrix powers; kappa_1 = 1 and the sequence
    obeys kappa_{m+n} <= A0 max(kappa_m, kappa_n) and
    kappa_n <= A0 n^(log2 A0).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = space.dist
    iu, ju = np.triu_indices(space.n, 1)
    kappas = []
    best_chain = d.copy()
    for n in range(1, n_max + 1):
        if n > 1:
            best_chain = _minplus(best_chain, d)
        if iu.size:
            kappas.append(float((d[iu, ju] / best_chain[iu, ju]).max()))
        else:
            kappas.append(1.0)
    kappas = np.asarray(kappas)
    a0 = constants.A0
    tol = 1e-12
    if abs(kappas[0] - 1.0) > tol:
        raise AssertionError("kappa_1 must equal 1")
    if np.any(np.diff(kappas) < -tol):
        raise AssertionError("kappa must be nondecreasing")
    for m in range(1, n_max + 1):
        for n in range(1, n_max + 1 - m):
            if kappas[m + n - 1] > a0 * max(kappas[m - 1], kappas[n - 1]) + tol:
                raise AssertionError("submultiplicative chain bound failed")
    for n in range(1, n_max + 1):
        if kappas[n - 1] > a0 * n ** math.log2(max(a0, 1.0)) + tol:
            raise AssertionError("power-law chain bound failed")
    return kappas


@dataclass(frozen=True)
class SeparatedSumReport:
    eps: float
    value: float
    argmax: int


def separated_sum_check(space: FiniteSpace, constants: SpaceConstants,
                        xi, eps: float) -> SeparatedSumReport:
    """sup_alpha exp(eps d(alpha, Xi)/A0) * sum_beta exp(-eps d(alpha, beta)).

    Xi must be 1-separated; the finite value is the empirical constant of the
    exponential-sum estimate over separated sets.
    """
    xi = np.asarray(sorted(set(map(int, xi))), dtype=int)
    if xi.size == 0:
        raise ValueError("Xi must be nonempty")
    if xi.size > 1:
        sub = space.dist[np.ix_(xi, xi)]
        off = sub[~np.eye(xi.size, dtype=bool)]
        if off.min() < 1.0:
            raise ValueError("Xi is not 1-separated")
    dmat = space.dist[:, xi]
    sums = np.exp(-eps * dmat).sum(axis=1)
    front = np.exp(eps * dmat.min(axis=1) / constants.A0)
    values = front * sums
    arg = int(np.argmax(values))
    return SeparatedSumReport(eps=float(eps), value=float(values[arg]), argmax=arg)

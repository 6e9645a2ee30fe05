"""Function-space and operator diagnostics over the wavelet machinery.

Everything here is an exact finite computation: dichotomy and sum estimates
are scanned over all admissible arguments, BMO and Carleson norms are exact
maxima, and operator checks compare against singular-value oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import NetHierarchy, ReferenceOrder
from .space import FiniteSpace, SpaceConstants, canonical_radii
from .splines import SplineTable
from .wavelets import WaveletBasis

__all__ = [
    "DichotomyVerdict",
    "KjSequence",
    "KernelSumReport",
    "empty_annulus_dichotomy",
    "kj_sequence",
    "verify_sum_large_balls",
    "sum_large_balls_sup",
    "verify_kernel_sums",
    "modulated_kernel",
    "volume_matrix",
    "bmo_norm",
    "ball_average_drift_check",
    "carleson_norm",
    "bmo_to_coefficients",
    "bmo_from_carleson",
    "bmo_carleson_roundtrip",
    "paraproduct_matrix",
    "operator_wavelet_matrix",
    "almost_diagonal_check",
    "schur_statistic",
    "operator_norm",
    "cz_kernel_check",
    "synthesize_kernel_from_bound",
    "size_redundancy_check",
    "discrete_hilbert_kernel",
]


# ---------------------------------------------------------------------------
# Dichotomy and sums over large balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomyVerdict:
    x: int
    r: float
    R: float
    eps: float
    volume_growth: bool
    annulus_empty: bool

    @property
    def verdict(self) -> str:
        if self.volume_growth and self.annulus_empty:
            return "both"
        return "volume-growth" if self.volume_growth else "empty-annulus"


def empty_annulus_dichotomy(space: FiniteSpace, constants: SpaceConstants,
                            x: int, r: float, R: float) -> DichotomyVerdict:
    """Either the ball mass grows by 1 + 1/Cmu(3 A0^2), or an annulus is empty."""
    if not R > r > 0:
        raise ValueError("need R > r > 0")
    a0 = constants.A0
    eps = 1.0 / constants.cmu(3.0 * a0**2)
    growth = space.volume(x, R) >= (1.0 + eps) * space.volume(x, r)
    row = space.dist[x]
    annulus = np.nonzero((row >= 2.0 * a0 * r) & (row < R / (2.0 * a0)))[0]
    empty = annulus.size == 0
    if not (growth or empty):
        raise AssertionError(
            f"dichotomy failed at x={x}, r={r}, R={R}: neither alternative holds"
        )
    return DichotomyVerdict(x=x, r=float(r), R=float(R), eps=eps,
                            volume_growth=bool(growth), annulus_empty=bool(empty))


def _largest_k_scale_geq(delta: float, r: float) -> int:
    # largest k with delta^k >= r
    k = 0
    if delta**k >= r:
        while delta ** (k + 1) >= r:
            k += 1
    else:
        while delta**k < r:
            k -= 1
    return k


def _dist_to_new_points(space: FiniteSpace, h: NetHierarchy, x: int, k: int) -> float:
    if not h.k_coarse <= k <= h.k_fine - 1:
        return math.inf
    ys = h.wavelet_centers(k)
    if ys.size == 0:
        return math.inf
    return float(space.dist[x, ys].min())


@dataclass(frozen=True)
class KjSequence:
    x: int
    r: float
    eps: float
    raw: tuple        # the k(j) values from the construction
    relabeled: tuple  # k_0 = k(0), k_{j+1} = k(j) - 2
    certificates: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def kj_sequence(space: FiniteSpace, constants: SpaceConstants, h: NetHierarchy,
                x: int, r: float) -> KjSequence:
    """Volume-growth level sequence with its distance-to-new-points certificates.

    k(0) is the largest level whose scale is at least r; each next k(j+1) is
    the largest level whose ball mass beats the previous one by the dichotomy
    factor.  In the gap levels the distance to the new points is certified
    from below, and past the end of the sequence no new points exist at all.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    a0 = constants.A0
    delta = h.delta
    eps = 1.0 / constants.cmu(3.0 * a0**2)
    total = space.total_mass
    raw = [_largest_k_scale_geq(delta, r)]
    while True:
        target = (1.0 + eps) * space.volume(x, delta ** raw[-1])
        if target > total:
            break
        k = raw[-1] - 1
        while space.volume(x, delta**k) < target:
            k -= 1
        raw.append(k)

    slack = 1.0 - 1e-12
    certificates = []
    failures = []
    v_r = space.volume(x, r)
    for j in range(len(raw)):
        lo = raw[j + 1] - 1 if j + 1 < len(raw) else h.k_coarse - 1
        hi = raw[j] - 2
        for k in range(max(lo, h.k_coarse - 1), hi + 1):
            vol_ok = space.volume(x, delta**k) >= (1.0 + eps) ** j * v_r * slack
            certificates.append(("volume", j, k, vol_ok))
            if not vol_ok:
                failures.append(f"volume certificate failed at j={j}, k={k}")
            dist_y = _dist_to_new_points(space, h, x, k)
            if j + 1 < len(raw):
                need = (delta / (2.0 * a0)) * delta ** raw[j + 1]
                dist_ok = dist_y + delta**k >= need * slack
            else:
                # terminal range: no new points may exist at these levels
                dist_ok = math.isinf(dist_y)
            certificates.append(("distance", j, k, dist_ok))
            if not dist_ok:
                failures.append(f"distance certificate failed at j={j}, k={k}")

    relabeled = (raw[0],) + tuple(k - 2 for k in raw)
    return KjSequence(x=x, r=float(r), eps=eps, raw=tuple(raw),
                      relabeled=relabeled, certificates=tuple(certificates),
                      failures=tuple(failures))


def verify_sum_large_balls(space: FiniteSpace, h: NetHierarchy, x: int, r: float,
                           nu: float, a: float, gamma: float) -> float:
    """Ratio of sum_k V(x, delta^k)^-nu exp(-gamma (d(x, Y^k)/delta^k)^a) to
    V(x, r)^-nu, summed over the levels with delta^k >= r."""
    if min(nu, a, gamma) <= 0:
        raise ValueError("nu, a, gamma must be positive")
    delta = h.delta
    k_top = _largest_k_scale_geq(delta, r)
    total = 0.0
    for k in range(h.k_coarse, min(k_top, h.k_fine - 1) + 1):
        dy = _dist_to_new_points(space, h, x, k)
        if math.isinf(dy):
            continue
        dk = delta**k
        total += space.volume(x, dk) ** -nu * math.exp(-gamma * (dy / dk) ** a)
    return total * space.volume(x, r) ** nu


def sum_large_balls_sup(space: FiniteSpace, h: NetHierarchy,
                        nu: float, a: float, gamma: float) -> float:
    """Worst ratio over every point and every canonical radius."""
    best = 0.0
    for x in range(space.n):
        for r in canonical_radii(space):
            best = max(best, verify_sum_large_balls(space, h, x, float(r),
                                                    nu, a, gamma))
    return best


# ---------------------------------------------------------------------------
# Kernel sums
# ---------------------------------------------------------------------------


def volume_matrix(space: FiniteSpace) -> np.ndarray:
    """V[x, y] = mu(B(x, d(x, y))); the diagonal is left at zero."""
    n = space.n
    out = np.zeros((n, n))
    w = space.weights
    for x in range(n):
        row = space.dist[x]
        order = np.argsort(row, kind="stable")
        cumw = np.cumsum(w[order])
        idx = np.searchsorted(row[order], row, side="left")
        vals = np.where(idx > 0, cumw[np.maximum(idx - 1, 0)], 0.0)
        out[x] = vals
        out[x, x] = 0.0
    return out


@dataclass(frozen=True)
class KernelSumReport:
    c_product: float
    c_difference: float
    n_pairs: int
    n_triples: int


def verify_kernel_sums(space: FiniteSpace, constants: SpaceConstants,
                       basis: WaveletBasis, eta: float) -> KernelSumReport:
    """Exact suprema of the absolute wavelet kernel sums.

    c_product bounds sum_i |psi_i(x) psi_i(y)| V(x, d(x,y)) over pairs;
    c_difference bounds the first-difference sum over admissible triples,
    normalized by (d(x,y)/d(x,x'))^eta.
    """
    W = np.abs(basis.wavelet_values)
    vol = volume_matrix(space)
    n = space.n
    pair_sum = W.T @ W
    mask = ~np.eye(n, dtype=bool)
    c_product = float((pair_sum * vol)[mask].max()) if n > 1 else 0.0

    a0 = constants.A0
    Wraw = basis.wavelet_values
    c_diff = 0.0
    n_triples = 0
    for x in range(n):
        diffs = np.abs(Wraw[:, x][:, None] - Wraw)  # (m, n) over x'
        sums = diffs.T @ W  # (x', y)
        dxx = space.dist[x]
        for xp in range(n):
            if xp == x:
                continue
            admissible = dxx > 2.0 * a0 * dxx[xp]
            admissible[x] = False
            admissible[xp] = False
            ys = np.nonzero(admissible)[0]
            if ys.size == 0:
                continue
            stats = sums[xp, ys] * vol[x, ys] * (dxx[ys] / dxx[xp]) ** eta
            n_triples += ys.size
            m = float(stats.max())
            if m > c_diff:
                c_diff = m
    return KernelSumReport(c_product=c_product, c_difference=c_diff,
                           n_pairs=int(mask.sum()), n_triples=n_triples)


def modulated_kernel(basis: WaveletBasis, signs: np.ndarray) -> np.ndarray:
    """K(x, y) = sum_i c_i psi_i(x) psi_i(y) for coefficients |c_i| <= 1."""
    W = basis.wavelet_values
    return W.T @ (np.asarray(signs)[:, None] * W)


# ---------------------------------------------------------------------------
# BMO and Carleson
# ---------------------------------------------------------------------------


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    half = 0.5 * cum[-1]
    return float(values[order][np.searchsorted(cum, half)])


def bmo_norm(space: FiniteSpace, b: np.ndarray, center: str = "average") -> float:
    """Exact max over balls of the mean oscillation around the ball average.

    ``center='median'`` instead uses the exact minimizer of the L1 oscillation
    (the weighted median); the two norms differ by at most a factor 2.
    """
    b = np.asarray(b, dtype=float)
    w = space.weights
    best = 0.0
    for x in range(space.n):
        row = space.dist[x]
        for r in canonical_radii(space):
            mask = row < r
            wm = w[mask]
            bm = b[mask]
            tot = wm.sum()
            if center == "average":
                # shifted mean: exact (zero oscillation) on constant inputs
                c = bm[0] + float(np.dot(wm, bm - bm[0]) / tot)
            elif center == "median":
                c = _weighted_median(bm, wm)
            else:
                raise ValueError("center must be 'average' or 'median'")
            best = max(best, float(np.dot(wm, np.abs(bm - c)) / tot))
    return best


@dataclass(frozen=True)
class DriftReport:
    constant: float
    witness: tuple | None


def ball_average_drift_check(space: FiniteSpace, b: np.ndarray) -> DriftReport:
    """Empirical constant in the two-ball average comparison.

    |b_B1 - b_B2| <= C ||b||_BMO (1 + log((r1 + r2 + d)/min(r1, r2))) over all
    pairs of canonical balls; returns the smallest admissible C.
    """
    b = np.asarray(b, dtype=float)
    norm = bmo_norm(space, b)
    if norm == 0.0:
        return DriftReport(constant=0.0, witness=None)
    radii = canonical_radii(space)
    w = space.weights
    centers = []
    avgs = []
    for x in range(space.n):
        row = space.dist[x]
        for r in radii:
            mask = row < r
            avgs.append(float(np.dot(w[mask], b[mask]) / w[mask].sum()))
            centers.append((x, float(r)))
    avgs = np.asarray(avgs)
    best = 0.0
    witness = None
    for i, (x1, r1) in enumerate(centers):
        for j in range(i + 1, len(centers)):
            x2, r2 = centers[j]
            drift = abs(avgs[i] - avgs[j])
            if drift == 0.0:
                continue
            factor = 1.0 + math.log((r1 + r2 + space.dist[x1, x2]) / min(r1, r2))
            ratio = drift / (norm * factor)
            if ratio > best:
                best = ratio
                witness = (centers[i], centers[j])
    return DriftReport(constant=best, witness=witness)


def _wavelet_positions(h: NetHierarchy, basis: WaveletBasis) -> np.ndarray:
    """Position of each wavelet's center inside level k+1 of the hierarchy."""
    pos = np.zeros(int(basis.is_wavelet.sum()), dtype=int)
    for i, (k, y) in enumerate(zip(basis.wavelet_levels, basis.wavelet_centers)):
        pos[i] = h.position(int(k) + 1, int(y))
    return pos


def carleson_norm(space: FiniteSpace, h: NetHierarchy, order: ReferenceOrder,
                  basis: WaveletBasis, coeffs: np.ndarray,
                  parent_maps=None) -> float:
    """Sup over dyadic cubes of the normalized mass of the coefficients
    sitting below the cube.

    By default the cubes come from the deterministic reference order; passing
    the parent maps of a sampled system evaluates the norm over that system's
    cubes instead (the two differ by a bounded factor).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    levels = basis.wavelet_levels
    if coeffs.shape != levels.shape:
        raise ValueError("coefficient field must match the wavelet index set")
    pos = _wavelet_positions(h, basis)
    if parent_maps is None:
        parent_maps = order.parents
    n = h.level(h.k_fine).size
    anc = {h.k_fine: np.arange(n)}
    for k in range(h.k_fine - 1, h.k_coarse - 1, -1):
        anc[k] = parent_maps[k - h.k_coarse][anc[k + 1]]
    best = 0.0
    for ell in range(h.k_coarse, h.k_fine + 1):
        n_cells = h.level(ell).size
        acc = np.zeros(n_cells)
        mass = np.zeros(n_cells)
        np.add.at(mass, anc[ell], space.weights)
        for i in range(coeffs.size):
            k1 = int(levels[i]) + 1
            if k1 < ell:
                continue
            p = int(pos[i])
            for kk in range(k1 - 1, ell - 1, -1):
                p = int(parent_maps[kk - h.k_coarse][p])
            acc[p] += coeffs[i] ** 2
        live = acc > 0
        if live.any():
            best = max(best, float(np.sqrt(acc[live] / mass[live]).max()))
    return best


def bmo_to_coefficients(basis: WaveletBasis, b: np.ndarray) -> np.ndarray:
    return basis.analyze(b)[basis.is_wavelet]


def bmo_from_carleson(space: FiniteSpace, basis: WaveletBasis,
                      coeffs: np.ndarray, x0: int, r0: float) -> np.ndarray:
    """Renormalized wavelet sum: coarse-scale terms are pinned at x0.

    Levels with scale exceeding r0 contribute psi - psi(x0); different
    choices of (x0, r0) change the output by an additive constant only.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    W = basis.wavelet_values
    f = W.T @ coeffs
    coarse = basis.delta ** basis.wavelet_levels.astype(float) > r0
    shift = float(np.dot(coeffs[coarse], W[coarse, x0]))
    return f - shift


@dataclass(frozen=True)
class RoundTripReport:
    bmo: float
    carleson: float
    residual: float  # deviation of (input - reconstruction) from a constant

    @property
    def ratio(self) -> float:
        return self.carleson / self.bmo if self.bmo > 0 else math.nan


def bmo_carleson_roundtrip(space: FiniteSpace, h: NetHierarchy,
                           order: ReferenceOrder, basis: WaveletBasis,
                           b: np.ndarray, x0: int = 0,
                           r0: float = 1.0) -> RoundTripReport:
    coeffs = bmo_to_coefficients(basis, b)
    rec = bmo_from_carleson(space, basis, coeffs, x0, r0)
    diff = np.asarray(b, dtype=float) - rec
    residual = float(diff.max() - diff.min())
    return RoundTripReport(
        bmo=bmo_norm(space, b),
        carleson=carleson_norm(space, h, order, basis, coeffs),
        residual=residual,
    )


# ---------------------------------------------------------------------------
# Paraproducts and operator diagnostics
# ---------------------------------------------------------------------------


def paraproduct_matrix(space: FiniteSpace, h: NetHierarchy, table: SplineTable,
                       basis: WaveletBasis, beta: np.ndarray) -> np.ndarray:
    """Matrix of the paraproduct with symbol beta on weighted functions.

    Averages the input against the L1-normalized next-level spline of each
    wavelet center, multiplies by the wavelet coefficient of beta and expands
    back on the wavelets; applying it to the constant 1 returns beta minus
    its mean.
    """
    beta = np.asarray(beta, dtype=float)
    W = basis.wavelet_values
    levels = basis.wavelet_levels
    pos = _wavelet_positions(h, basis)
    cb = W @ (beta * space.weights)
    rows = np.zeros_like(W)
    for i in range(W.shape[0]):
        s = table.at(int(levels[i]) + 1)[pos[i]]
        rows[i] = s / float(np.dot(s, space.weights))
    return W.T @ (cb[:, None] * rows * space.weights[None, :])


def operator_wavelet_matrix(space: FiniteSpace, basis: WaveletBasis,
                            T: np.ndarray, kind: str = "matrix") -> np.ndarray:
    """Coefficients <T psi_j, psi_i> of an operator against the wavelet family.

    ``kind='matrix'`` treats T as a plain matrix acting on function values;
    ``kind='kernel'`` treats it as a kernel integrated against the measure.
    """
    T = np.asarray(T, dtype=float)
    if kind == "kernel":
        A = T * space.weights[None, :]
    elif kind == "matrix":
        A = T
    else:
        raise ValueError("kind must be 'matrix' or 'kernel'")
    W = basis.wavelet_values
    images = A @ W.T  # columns: T psi_j
    return W @ (space.weights[:, None] * images)


def _wavelet_ball_volumes(space: FiniteSpace, basis: WaveletBasis) -> np.ndarray:
    scales = basis.delta ** basis.wavelet_levels.astype(float)
    return np.asarray([
        space.volume(int(y), float(s))
        for y, s in zip(basis.wavelet_centers, scales)
    ])


def _almost_diagonal_bound(space: FiniteSpace, basis: WaveletBasis,
                           eps: float) -> np.ndarray:
    """Reference bound: scale-gap times center-separation times volume factor."""
    levels = basis.wavelet_levels.astype(float)
    centers = basis.wavelet_centers
    delta = basis.delta
    bvol = _wavelet_ball_volumes(space, basis)
    d_centers = space.dist[np.ix_(centers, centers)]
    kmin = np.minimum(levels[:, None], levels[None, :])
    gap = delta ** (np.abs(levels[:, None] - levels[None, :]) * eps)
    sep = (1.0 + delta ** (-kmin) * d_centers) ** -eps
    vrel = np.array([
        [space.volume(int(centers[i]), float(d_centers[i, j]))
         if d_centers[i, j] > 0 else 0.0
         for j in range(centers.size)]
        for i in range(centers.size)
    ])
    denom = bvol[:, None] + bvol[None, :] + vrel
    return gap * sep * np.sqrt(np.outer(bvol, bvol)) / denom


@dataclass(frozen=True)
class AlmostDiagonalReport:
    C0: float
    witness: tuple | None


def almost_diagonal_check(space: FiniteSpace, basis: WaveletBasis,
                          coeffs: np.ndarray, eps: float) -> AlmostDiagonalReport:
    """Smallest C0 making |coef| <= C0 * (scale-gap, separation, volume) bound."""
    bound = _almost_diagonal_bound(space, basis, eps)
    ratios = np.abs(np.asarray(coeffs)) / bound
    idx = np.unravel_index(np.argmax(ratios), ratios.shape)
    return AlmostDiagonalReport(C0=float(ratios[idx]), witness=(int(idx[0]), int(idx[1])))


def schur_statistic(space: FiniteSpace, basis: WaveletBasis,
                    coeffs: np.ndarray) -> tuple[float, float]:
    """Weighted row/column l1 statistics whose max dominates the l2 norm."""
    wgt = np.sqrt(_wavelet_ball_volumes(space, basis))
    C = np.abs(np.asarray(coeffs))
    col = float(((C * wgt[:, None]).sum(axis=0) / wgt).max())
    row = float(((C * wgt[None, :]).sum(axis=1) / wgt).max())
    return col, row


def operator_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(matrix), compute_uv=False)[0])


@dataclass(frozen=True)
class CZReport:
    size_constant: float
    regularity_first: float
    regularity_second: float


def cz_kernel_check(space: FiniteSpace, constants: SpaceConstants,
                    K: np.ndarray, s: float) -> CZReport:
    """Empirical size and Hoelder-regularity constants of an off-diagonal kernel."""
    K = np.asarray(K, dtype=float)
    vol = volume_matrix(space)
    n = space.n
    mask = ~np.eye(n, dtype=bool)
    size_c = float((np.abs(K) * vol)[mask].max()) if n > 1 else 0.0
    a0 = constants.A0
    reg1 = 0.0
    reg2 = 0.0
    d = space.dist
    for x in range(n):
        for xp in range(n):
            dxx = d[x, xp]
            if dxx <= 0:
                continue
            ys = np.nonzero((d[x] >= 2.0 * a0 * dxx) & (np.arange(n) != x)
                            & (np.arange(n) != xp))[0]
            if ys.size == 0:
                continue
            ratio = (d[x, ys] / dxx) ** s * vol[x, ys]
            reg1 = max(reg1, float((np.abs(K[x, ys] - K[xp, ys]) * ratio).max()))
            reg2 = max(reg2, float((np.abs(K[ys, x] - K[ys, xp]) * ratio).max()))
    return CZReport(size_constant=size_c, regularity_first=reg1,
                    regularity_second=reg2)


def synthesize_kernel_from_bound(space: FiniteSpace, basis: WaveletBasis,
                                 eps: float) -> np.ndarray:
    """Kernel assembled from coefficients saturating the almost-diagonal bound."""
    coeffs = _almost_diagonal_bound(space, basis, eps)
    W = basis.wavelet_values
    return W.T @ coeffs @ W


def size_redundancy_check(space: FiniteSpace, basis: WaveletBasis,
                          eps: float) -> float:
    """Size constant of the bound-saturating synthesized kernel."""
    K = synthesize_kernel_from_bound(space, basis, eps)
    vol = volume_matrix(space)
    mask = ~np.eye(space.n, dtype=bool)
    return float((np.abs(K) * vol)[mask].max())


def discrete_hilbert_kernel(n: int) -> np.ndarray:
    """Antisymmetric 1/sin kernel on the n-cycle with zero diagonal."""
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore"):
        K = np.where(diff == 0, 0.0, 1.0 / np.sin(math.pi * diff / n))
    return K

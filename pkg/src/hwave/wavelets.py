"""Orthonormal wavelet basis built over the new points of each level.

Pre-wavelets are next-level splines minus their projection onto the current
spline span; symmetric orthonormalization (Gram inverse square root) then
turns each level family into an orthonormal set without destroying locality.
The coarse direction closes with the normalized constant, so the final family
is a genuine basis: member count equals the number of points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from .mra import GramSystem, NotSPDError, inverse_and_sqrt
from .nets import NetHierarchy
from .space import FiniteSpace, SpaceConstants
from .splines import SplineTable

__all__ = [
    "WaveletBasis",
    "WaveletDecayReport",
    "pre_wavelets",
    "orthonormalize_level",
    "assemble_basis",
    "analyze",
    "synthesize",
    "kernel_of_projection",
    "decay_and_regularity_report",
    "wavelet_decay_a",
    "save_basis",
    "load_basis",
]


def wavelet_decay_a(constants: SpaceConstants) -> float:
    """Decay exponent of the wavelets: 1 for a metric, else (1+2 log2 A0)^-1."""
    if constants.A0 <= 1.0:
        return 1.0
    return 1.0 / (1.0 + 2.0 * math.log2(constants.A0))


def pre_wavelets(space: FiniteSpace, h: NetHierarchy, table: SplineTable,
                 gramsys: GramSystem, k: int, tol: float = 1e-10):
    """Level-k pre-wavelets: one per new point, orthogonal to the level span.

    Returns (values, center point ids); empty when the level adds no points.
    """
    ys = h.wavelet_centers(k)
    if ys.size == 0:
        return np.zeros((0, space.n)), ys
    ypos = h.position(k + 1, ys)
    s_next = table.at(k + 1)[ypos]
    s_cur = table.at(k)
    stilde = gramsys.at(k).stilde
    coef = space.gram(s_next, stilde)
    tilde_psi = s_next - coef @ s_cur
    ortho = space.gram(tilde_psi, s_cur)
    if np.abs(ortho).max() > tol:
        raise NotSPDError(f"pre-wavelets at level {k} not orthogonal to the span")
    means = tilde_psi @ space.weights
    if np.abs(means).max() > tol:
        raise NotSPDError(f"pre-wavelets at level {k} have nonzero mean")
    return tilde_psi, ys


def orthonormalize_level(space: FiniteSpace, tilde_psi: np.ndarray,
                         volumes: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric orthonormalization of one level family.

    ``volumes`` are the ball masses of the new points at the next-level scale;
    they normalize the Gram before the inverse square root is applied.
    """
    if tilde_psi.shape[0] == 0:
        return tilde_psi
    sqrt_vol = np.sqrt(volumes)
    gram = space.gram(tilde_psi, tilde_psi) / np.outer(sqrt_vol, sqrt_vol)
    gram = 0.5 * (gram + gram.T)
    _, isqrt = inverse_and_sqrt(gram)
    psi = (isqrt / sqrt_vol[None, :]) @ tilde_psi
    check = space.gram(psi, psi)
    err = np.abs(check - np.eye(psi.shape[0])).max()
    if err > tol:
        raise NotSPDError(f"orthonormalization residual {err:.2e}")
    return psi


@dataclass(frozen=True)
class WaveletBasis:
    space: FiniteSpace
    delta: float
    k_coarse: int
    k_fine: int
    values: np.ndarray      # one row per member, evaluated on all points
    levels: np.ndarray      # level of each member (coarse member: k_coarse)
    centers: np.ndarray     # point id each member concentrates at
    is_wavelet: np.ndarray

    @property
    def n_members(self) -> int:
        return self.values.shape[0]

    @property
    def wavelet_values(self) -> np.ndarray:
        return self.values[self.is_wavelet]

    @property
    def wavelet_levels(self) -> np.ndarray:
        return self.levels[self.is_wavelet]

    @property
    def wavelet_centers(self) -> np.ndarray:
        return self.centers[self.is_wavelet]

    def analyze(self, f: np.ndarray) -> np.ndarray:
        return self.values @ (np.asarray(f) * self.space.weights)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.values.T @ np.asarray(coeffs)


def analyze(basis: WaveletBasis, f: np.ndarray) -> np.ndarray:
    return basis.analyze(f)


def synthesize(basis: WaveletBasis, coeffs: np.ndarray) -> np.ndarray:
    return basis.synthesize(coeffs)


def assemble_basis(space: FiniteSpace, h: NetHierarchy, table: SplineTable,
                   gramsys: GramSystem, tol: float = 1e-8) -> WaveletBasis:
    """Constant plus all level wavelets; verifies the family is orthonormal."""
    rows = [np.full(space.n, 1.0 / math.sqrt(space.total_mass))]
    levels = [h.k_coarse]
    centers = [int(h.level(h.k_coarse)[0])]
    flags = [False]
    for k in range(h.k_coarse, h.k_fine):
        tilde_psi, ys = pre_wavelets(space, h, table, gramsys, k)
        if ys.size == 0:
            continue
        ypos = h.position(k + 1, ys)
        volumes = gramsys.at(k + 1).volumes[ypos]
        psi = orthonormalize_level(space, tilde_psi, volumes)
        for i, y in enumerate(ys):
            rows.append(psi[i])
            levels.append(k)
            centers.append(int(y))
            flags.append(True)
    values = np.vstack(rows)
    if values.shape[0] != space.n:
        raise NotSPDError(
            f"basis has {values.shape[0]} members for {space.n} points"
        )
    gram = space.gram(values, values)
    err = float(np.abs(gram - np.eye(space.n)).max())
    if err > tol:
        raise NotSPDError(f"basis Gram deviates from identity by {err:.2e}")
    return WaveletBasis(
        space=space, delta=h.delta, k_coarse=h.k_coarse, k_fine=h.k_fine,
        values=values, levels=np.asarray(levels), centers=np.asarray(centers),
        is_wavelet=np.asarray(flags),
    )


def kernel_of_projection(space: FiniteSpace, gramsys: GramSystem,
                         basis: WaveletBasis, k: int, kind: str) -> np.ndarray:
    """Kernel matrix of P_k (scaling span) or Q_k (level-k wavelet span)."""
    if kind == "P":
        phi = gramsys.at(k).phi
        return phi.T @ phi
    if kind == "Q":
        sel = basis.is_wavelet & (basis.levels == k)
        psi = basis.values[sel]
        if psi.shape[0] == 0:
            return np.zeros((space.n, space.n))
        return psi.T @ psi
    raise ValueError("kind must be 'P' or 'Q'")


@dataclass(frozen=True)
class WaveletDecayReport:
    level: int
    a: float
    gamma: float
    C: float
    max_residual: float
    holder_sup: float
    n_entries: int


def decay_and_regularity_report(space: FiniteSpace, constants: SpaceConstants,
                                h: NetHierarchy, basis: WaveletBasis,
                                eta: float, floor: float = 1e-14):
    """Per-level decay fit and Hoelder statistic for the wavelet rows.

    The fit normalizes each wavelet by the root ball volume of its center at
    its own scale and regresses the log magnitude on the scaled distance to
    the center raised to the decay exponent.
    """
    a = wavelet_decay_a(constants)
    reports = []
    for k in range(h.k_coarse, h.k_fine):
        sel = basis.is_wavelet & (basis.levels == k)
        if not sel.any():
            continue
        psi = basis.values[sel]
        ys = basis.centers[sel]
        dk = h.scale(k)
        root_vol = np.sqrt([space.volume(int(y), dk) for y in ys])
        normalized = np.abs(psi) * root_vol[:, None]
        u_all = (space.dist[ys] / dk) ** a
        live = normalized > floor
        u = u_all[live]
        v = np.log(normalized[live])
        if u.size >= 2 and np.unique(u).size >= 2:
            design = np.stack([np.ones_like(u), -u], axis=1)
            coef, *_ = np.linalg.lstsq(design, v, rcond=None)
            lnC, gamma = float(coef[0]), float(coef[1])
            resid = float((v - design @ coef).max())
        else:
            lnC, gamma, resid = float(v.max()) if v.size else 0.0, 0.0, 0.0
        holder_sup = 0.0
        iu, ju = np.triu_indices(space.n, 1)
        close = space.dist[iu, ju] <= dk
        for i in range(psi.shape[0]):
            diffs = np.abs(psi[i, iu[close]] - psi[i, ju[close]])
            dpair = space.dist[iu[close], ju[close]]
            damp = np.exp(gamma * u_all[i, iu[close]])
            stats = diffs * root_vol[i] * (dk / dpair) ** eta * damp
            if stats.size:
                holder_sup = max(holder_sup, float(stats.max()))
        reports.append(WaveletDecayReport(
            level=k, a=a, gamma=gamma, C=math.exp(lnC),
            max_residual=resid, holder_sup=holder_sup, n_entries=int(live.sum()),
        ))
    return reports


def save_basis(basis: WaveletBasis, path) -> None:
    members = []
    for i in range(basis.n_members):
        members.append({
            "level": int(basis.levels[i]),
            "center": int(basis.centers[i]),
            "kind": "wavelet" if bool(basis.is_wavelet[i]) else "scaling",
            "values": basis.values[i].tolist(),
        })
    payload = {
        "n": basis.space.n,
        "delta": basis.delta,
        "k_coarse": basis.k_coarse,
        "k_fine": basis.k_fine,
        "members": members,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_basis(space: FiniteSpace, path) -> WaveletBasis:
    data = json.loads(Path(path).read_text())
    members = data["members"]
    return WaveletBasis(
        space=space,
        delta=float(data["delta"]),
        k_coarse=int(data["k_coarse"]),
        k_fine=int(data["k_fine"]),
        values=np.asarray([m["values"] for m in members], dtype=float),
        levels=np.asarray([m["level"] for m in members], dtype=int),
        centers=np.asarray([m["center"] for m in members], dtype=int),
        is_wavelet=np.asarray([m["kind"] == "wavelet" for m in members]),
    )

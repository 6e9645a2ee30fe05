"""Randomized dyadic systems: sampled orders, cube partitions, boundary layers.

Each level k of the hierarchy draws an independent coordinate (ell_k, m_k)
uniformly from {0..L} x {1..M}.  The coordinate may promote one child per
center to a "new" dyadic point z, which in turn perturbs the parent relation
between levels k+1 and k.  Cubes are ancestor preimages under the perturbed
relation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nets import GeometryViolation, NetHierarchy, ReferenceOrder
from .space import FiniteSpace, SpaceConstants

__all__ = [
    "OmegaSample",
    "RandomizedSystem",
    "CubeMachine",
    "BoundaryEstimate",
    "sample_omega",
    "sample_omega_batch",
    "new_points",
    "new_order",
    "build_cubes",
    "verify_system",
    "verify_center_sandwich",
    "boundary_layer_probability",
    "theoretical_eta",
    "boundary_theory_bound",
    "save_system",
]


@dataclass(frozen=True)
class OmegaSample:
    """One draw of the per-level coordinates, levels k_coarse .. k_fine-1."""

    k_coarse: int
    ell: np.ndarray
    m: np.ndarray
    seed: int | None = None

    @property
    def num_levels(self) -> int:
        return len(self.ell)

    def coord(self, k: int) -> tuple[int, int]:
        i = k - self.k_coarse
        return int(self.ell[i]), int(self.m[i])


def _coord_rng(seed: int, level_offset: int, which: int) -> np.random.Generator:
    # one independent stream per (level, coordinate); draws are therefore
    # independent of both the evaluation order and the batch size
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(level_offset), int(which)]))


def sample_omega_batch(order: ReferenceOrder, seed: int, nsamples: int):
    """Vectorized draws: arrays of shape (num_levels, nsamples)."""
    if nsamples < 1:
        raise ValueError("nsamples must be >= 1")
    nlev = order.k_fine - order.k_coarse
    ell = np.zeros((nlev, nsamples), dtype=np.int64)
    m = np.zeros((nlev, nsamples), dtype=np.int64)
    for i in range(nlev):
        ell[i] = _coord_rng(seed, i, 0).integers(0, order.L + 1, size=nsamples)
        m[i] = _coord_rng(seed, i, 1).integers(1, order.M + 1, size=nsamples)
    return ell, m


def sample_omega(order: ReferenceOrder, seed: int) -> OmegaSample:
    ell, m = sample_omega_batch(order, seed, 1)
    return OmegaSample(k_coarse=order.k_coarse, ell=ell[:, 0], m=m[:, 0], seed=seed)


def _new_points_level(h: NetHierarchy, order: ReferenceOrder, k: int,
                      ell_k: int, m_k: int) -> np.ndarray:
    """Point ids of z^k_alpha for a single level coordinate."""
    lev = h.level(k)
    nxt = h.level(k + 1)
    z = lev.copy()
    lab1 = order.label1_at(k)
    lab2 = order.label2_at(k + 1)
    for alpha in np.nonzero(lab1 == ell_k)[0]:
        kids = order.children_at(k)[alpha]
        match = kids[lab2[kids] == m_k]
        if match.size:
            z[alpha] = nxt[match[0]]
    return z


def new_points(h: NetHierarchy, order: ReferenceOrder, omega: OmegaSample) -> tuple:
    """z assignment per level; identical to the reference points at k_fine."""
    zs = []
    for k in range(h.k_coarse, h.k_fine):
        ell_k, m_k = omega.coord(k)
        zs.append(_new_points_level(h, order, k, ell_k, m_k))
    zs.append(h.level(h.k_fine).copy())
    return tuple(zs)


def _check_z_separation(space, constants, h, k, z_points):
    if z_points.size < 2:
        return
    sub = space.dist[np.ix_(z_points, z_points)]
    off = sub[~np.eye(z_points.size, dtype=bool)]
    need = h.scale(k) / (2.0 * constants.A0)
    if off.min() < need:
        raise GeometryViolation(
            f"new points at level {k} closer than (2A0)^-1 delta^k"
        )


def _new_order_level(space: FiniteSpace, constants: SpaceConstants,
                     h: NetHierarchy, order: ReferenceOrder, k: int,
                     z_points: np.ndarray) -> np.ndarray:
    """Positions of the omega-parent of every level-(k+1) point."""
    nxt = h.level(k + 1)
    thr = 0.25 * constants.A0**-2 * h.scale(k)
    dmat = space.dist[np.ix_(nxt, z_points)]
    close = dmat < thr
    counts = close.sum(axis=1)
    if np.any(counts > 1):
        bad = int(np.argmax(counts))
        raise GeometryViolation(
            f"point {nxt[bad]} has {counts[bad]} near new parents at level {k}"
        )
    fallback = order.parent_at(k)
    return np.where(counts == 1, np.argmax(close, axis=1), fallback)


def new_order(space, constants, h, order, omega, z=None) -> tuple:
    """Omega-parent maps for all consecutive level pairs."""
    if z is None:
        z = new_points(h, order, omega)
    parents = []
    for k in range(h.k_coarse, h.k_fine):
        zk = z[k - h.k_coarse]
        _check_z_separation(space, constants, h, k, zk)
        parents.append(_new_order_level(space, constants, h, order, k, zk))
    return tuple(parents)


@dataclass(frozen=True)
class RandomizedSystem:
    k_coarse: int
    k_fine: int
    omega: OmegaSample
    z: tuple        # per level: point ids of the new dyadic points
    parents: tuple  # per level k in [k_coarse, k_fine-1]: positions at level k
    cubes: tuple    # per level: ancestor position of every point of X

    def z_at(self, k: int) -> np.ndarray:
        return self.z[k - self.k_coarse]

    def parents_at(self, k: int) -> np.ndarray:
        return self.parents[k - self.k_coarse]

    def cubes_at(self, k: int) -> np.ndarray:
        return self.cubes[k - self.k_coarse]

    def cube_members(self, k: int, alpha: int) -> np.ndarray:
        return np.nonzero(self.cubes_at(k) == alpha)[0]


def _ancestors_from_parents(h: NetHierarchy, parents: tuple) -> tuple:
    n = h.level(h.k_fine).size
    anc = [np.arange(n)]
    for i in range(len(parents) - 1, -1, -1):
        anc.append(parents[i][anc[-1]])
    anc.reverse()
    return tuple(anc)


def build_cubes(space, constants, h, order, omega, check: bool = True) -> RandomizedSystem:
    """Assemble the full randomized system for one omega draw."""
    z = new_points(h, order, omega)
    parents = new_order(space, constants, h, order, omega, z)
    cubes = _ancestors_from_parents(h, parents)
    system = RandomizedSystem(
        k_coarse=h.k_coarse, k_fine=h.k_fine,
        omega=omega, z=z, parents=parents, cubes=cubes,
    )
    if check:
        report = verify_system(space, constants, h, order, system)
        if not report.ok:
            raise GeometryViolation("cube geometry failed: " + "; ".join(report.failures))
    return system


@dataclass(frozen=True)
class SystemReport:
    checks: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_system(space, constants, h, order, system) -> SystemReport:
    """Every per-sample conclusion: separation, covering, tiling, sandwiches."""
    a0 = constants.A0
    checks = []
    failures = []

    def record(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        if not ok:
            failures.append(f"{name}: {detail}" if detail else name)

    for k in range(h.k_coarse, h.k_fine + 1):
        dk = h.scale(k)
        lev = h.level(k)
        zk = system.z_at(k)
        if k < h.k_fine:
            nxt = h.level(k + 1)
            allowed = [set(nxt[order.children_at(k)[a]]) | {lev[a]}
                       for a in range(lev.size)]
            ok = all(zk[a] in allowed[a] for a in range(lev.size))
            record(f"z-in-children level {k}", ok)
        if zk.size > 1:
            sub = space.dist[np.ix_(zk, zk)]
            worst = sub[~np.eye(zk.size, dtype=bool)].min()
            record(f"z-separation level {k}", worst >= dk / (2 * a0),
                   f"min {worst:.3g} vs {dk / (2 * a0):.3g}")
        cov = space.dist[:, zk].min(axis=1).max()
        record(f"z-covering level {k}", cov < 4 * a0**2 * dk,
               f"worst {cov:.3g} vs {4 * a0**2 * dk:.3g}")

        cubes_k = system.cubes_at(k)
        record(f"cube-partition level {k}",
               cubes_k.min() >= 0 and cubes_k.max() < lev.size)
        for alpha in range(lev.size):
            members = np.nonzero(cubes_k == alpha)[0]
            zc = zk[alpha]
            xc = lev[alpha]
            inner = np.nonzero(space.dist[zc] < dk * a0**-5 / 6.0)[0]
            if not np.all(np.isin(inner, members)):
                record(f"cube-inner-ball level {k}", False, f"alpha={alpha}")
            if members.size:
                spread = space.dist[zc, members].max()
                if not spread < 6 * a0**4 * dk:
                    record(f"cube-outer-ball level {k}", False, f"alpha={alpha}")
            inner_c = np.nonzero(space.dist[xc] < dk * a0**-3 / 8.0)[0]
            if not np.all(np.isin(inner_c, members)):
                record(f"centre-inner-ball level {k}", False, f"alpha={alpha}")
            if members.size:
                spread_c = space.dist[xc, members].max()
                if not spread_c <= 8 * a0**5 * dk:
                    record(f"centre-outer-ball level {k}", False, f"alpha={alpha}")
        record(f"cube-sandwich level {k}", True)

    for k in range(h.k_coarse, h.k_fine):
        dk = h.scale(k)
        zk = system.z_at(k)
        znext = system.z_at(k + 1)
        par = system.parents_at(k)
        dmat = space.dist[np.ix_(znext, zk)]
        chosen = dmat[np.arange(znext.size), par]
        record(f"omega-parent-distance level {k}", np.all(chosen < 5 * a0**3 * dk),
               f"max {chosen.max():.3g}")
        must = dmat < dk * a0**-3 / 5.0
        rows, cols = np.nonzero(must)
        record(f"close-implies-parent level {k}", np.all(par[rows] == cols))
        if k > h.k_coarse:
            ok_tile = np.array_equal(system.cubes_at(k),
                                     system.parents_at(k)[system.cubes_at(k + 1)])
        else:
            ok_tile = True
        record(f"child-tiling level {k}", ok_tile)

    # iterated two-sided bounds across level gaps
    for k in range(h.k_coarse, h.k_fine + 1):
        dk = h.scale(k)
        zk = system.z_at(k)
        for l in range(k, h.k_fine + 1):
            zl = system.z_at(l)
            cell_anc = np.arange(zl.size)
            for kk in range(l - 1, k - 1, -1):
                cell_anc = system.parents_at(kk)[cell_anc]
            dmat = space.dist[np.ix_(zl, zk)]
            desc_d = dmat[np.arange(zl.size), cell_anc]
            record(f"iterated-descendant-distance {l}->{k}",
                   np.all(desc_d < 6 * a0**4 * dk), f"max {desc_d.max():.3g}")
            must = dmat < dk * a0**-4 / 6.0
            r2, c2 = np.nonzero(must)
            record(f"iterated-close-implies-descendant {l}->{k}",
                   np.all(cell_anc[r2] == c2))
    return SystemReport(checks=tuple(checks), failures=tuple(failures))


def verify_center_sandwich(space, constants, h, system) -> SystemReport:
    """Reference centers work as cube centers: inner and outer ball margins."""
    a0 = constants.A0
    checks = []
    failures = []
    for k in range(h.k_coarse, h.k_fine + 1):
        dk = h.scale(k)
        lev = h.level(k)
        cubes_k = system.cubes_at(k)
        worst_inner = math.inf
        worst_outer = 0.0
        ok = True
        for alpha in range(lev.size):
            members = np.nonzero(cubes_k == alpha)[0]
            xc = lev[alpha]
            inner = np.nonzero(space.dist[xc] < dk * a0**-3 / 8.0)[0]
            if not np.all(np.isin(inner, members)):
                ok = False
                failures.append(f"inner ball escapes cube: level {k} alpha {alpha}")
            if members.size:
                spread = float(space.dist[xc, members].max())
                worst_outer = max(worst_outer, spread)
                if spread > 8 * a0**5 * dk:
                    ok = False
                    failures.append(f"cube leaves outer ball: level {k} alpha {alpha}")
            outside = np.nonzero(cubes_k != alpha)[0]
            if outside.size:
                worst_inner = min(worst_inner, float(space.dist[xc, outside].min()))
        checks.append((f"centre-sandwich level {k}", ok,
                       f"nearest-foreign {worst_inner:.3g}, outer {worst_outer:.3g} "
                       f"vs {8 * a0**5 * dk:.3g}"))
    return SystemReport(checks=tuple(checks), failures=tuple(failures))


# ---------------------------------------------------------------------------
# Outcome tables and Monte Carlo
# ---------------------------------------------------------------------------


class CubeMachine:
    """Per-level enumeration of all (L+1)*M coordinate outcomes.

    The parent relation between levels k+1 and k depends only on the level-k
    coordinate, so every randomized quantity is a composition of per-level
    tables.  Enumerating the outcomes once makes exact transition
    probabilities and large Monte Carlo runs cheap.
    """

    def __init__(self, space: FiniteSpace, constants: SpaceConstants,
                 h: NetHierarchy, order: ReferenceOrder):
        self.space = space
        self.constants = constants
        self.h = h
        self.order = order
        self.n_outcomes = (order.L + 1) * order.M
        self.z_tables = {}
        self.parent_tables = {}
        for k in range(h.k_coarse, h.k_fine):
            z_rows = []
            p_rows = []
            for ell in range(order.L + 1):
                for m in range(1, order.M + 1):
                    z = _new_points_level(h, order, k, ell, m)
                    _check_z_separation(space, constants, h, k, z)
                    p = _new_order_level(space, constants, h, order, k, z)
                    z_rows.append(z)
                    p_rows.append(p)
            self.z_tables[k] = np.asarray(z_rows)
            self.parent_tables[k] = np.asarray(p_rows, dtype=np.int32)

    def outcome_index(self, ell: int, m: int) -> int:
        return ell * self.order.M + (m - 1)

    def sample_outcomes(self, seed: int, nsamples: int) -> np.ndarray:
        ell, m = sample_omega_batch(self.order, seed, nsamples)
        return ell * self.order.M + (m - 1)

    def system(self, omega: OmegaSample) -> RandomizedSystem:
        z = []
        parents = []
        for k in range(self.h.k_coarse, self.h.k_fine):
            idx = self.outcome_index(*omega.coord(k))
            z.append(self.z_tables[k][idx])
            parents.append(self.parent_tables[k][idx])
        z.append(self.h.level(self.h.k_fine).copy())
        cubes = _ancestors_from_parents(self.h, tuple(parents))
        return RandomizedSystem(
            k_coarse=self.h.k_coarse, k_fine=self.h.k_fine,
            omega=omega, z=tuple(z), parents=tuple(parents), cubes=cubes,
        )

    def sample_system(self, seed: int) -> RandomizedSystem:
        return self.system(sample_omega(self.order, seed))

    def ancestors_batch(self, outcomes: np.ndarray, k: int) -> np.ndarray:
        """Level-k ancestor positions of every point, one row per sample."""
        nsamples = outcomes.shape[1]
        n = self.h.level(self.h.k_fine).size
        anc = np.broadcast_to(np.arange(n, dtype=np.int32), (nsamples, n)).copy()
        for kk in range(self.h.k_fine - 1, k - 1, -1):
            table = self.parent_tables[kk]
            anc = table[outcomes[kk - self.h.k_coarse][:, None], anc]
        return anc


@dataclass(frozen=True)
class BoundaryEstimate:
    eps: float
    estimate: float
    stderr: float
    theory_bound: float
    nsamples: int


def theoretical_eta(order: ReferenceOrder, delta: float) -> float:
    """Boundary-layer exponent log(1 - tau) / log(delta), tau = 1/((L+1) M).

    Returns infinity when tau = 1 (boundary event impossible after one level).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    tau = 1.0 / ((order.L + 1) * order.M)
    if tau >= 1.0:
        return math.inf
    return math.log1p(-tau) / math.log(delta)


def boundary_theory_bound(constants: SpaceConstants, eta: float, eps: float) -> float:
    """(7 A0^6 eps)^eta, capped at 1 and handling the degenerate eta."""
    base = 7.0 * constants.A0**6 * eps
    if math.isinf(eta):
        return 0.0 if base < 1.0 else 1.0
    return min(1.0, base**eta)


def boundary_layer_probability(machine: CubeMachine, x: int, k: int, eps: float,
                               nsamples: int, seed: int) -> BoundaryEstimate:
    """Monte Carlo frequency of x landing in an eps-boundary layer at level k."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if nsamples < 1:
        raise ValueError("nsamples must be >= 1")
    outcomes = machine.sample_outcomes(seed, nsamples)
    anc = machine.ancestors_batch(outcomes, k)
    member = anc == anc[:, x][:, None]
    dx = machine.space.dist[x]
    masked = np.where(member, math.inf, dx[None, :])
    dist_to_complement = masked.min(axis=1)
    hits = dist_to_complement < eps * machine.h.scale(k)
    p = float(hits.mean())
    stderr = math.sqrt(p * (1.0 - p) / nsamples)
    eta = theoretical_eta(machine.order, machine.h.delta)
    bound = boundary_theory_bound(machine.constants, eta, eps)
    return BoundaryEstimate(eps=float(eps), estimate=p, stderr=stderr,
                            theory_bound=bound, nsamples=nsamples)


def save_system(system: RandomizedSystem, path) -> None:
    payload = {
        "k_coarse": system.k_coarse,
        "k_fine": system.k_fine,
        "seed": system.omega.seed,
        "ell": system.omega.ell.tolist(),
        "m": system.omega.m.tolist(),
        "z": [z.tolist() for z in system.z],
        "parents": [p.tolist() for p in system.parents],
        "cubes": [c.tolist() for c in system.cubes],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")

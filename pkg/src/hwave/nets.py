"""Nested nets of reference dyadic points, reference partial order, labels.

Level k holds a maximal delta^k-separated subset of the space; levels are
nested upward.  The greedy scans always run over ascending point ids so the
whole construction is reproducible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .space import FiniteSpace, SpaceConstants

__all__ = [
    "NetHierarchy",
    "ReferenceOrder",
    "NetError",
    "GeometryViolation",
    "build_nets",
    "verify_nets",
    "build_reference_order",
    "reference_cubes",
    "save_nets",
    "load_nets",
]

STRICT_DELTA_COEFF = 1e-3  # strict mode requires delta <= coeff * A0**-10


class NetError(ValueError):
    """Invalid construction parameters."""


class GeometryViolation(RuntimeError):
    """A geometric conclusion failed at runtime; decrease delta."""

    def __init__(self, message: str):
        super().__init__(message + " (suggestion: decrease delta)")


@dataclass(frozen=True)
class NetHierarchy:
    delta: float
    k_coarse: int
    k_fine: int
    levels: tuple  # per level: sorted int array of point ids

    @property
    def num_levels(self) -> int:
        return self.k_fine - self.k_coarse + 1

    def level(self, k: int) -> np.ndarray:
        if not self.k_coarse <= k <= self.k_fine:
            raise KeyError(f"level {k} outside [{self.k_coarse}, {self.k_fine}]")
        return self.levels[k - self.k_coarse]

    def scale(self, k: int) -> float:
        return self.delta**k

    def wavelet_centers(self, k: int) -> np.ndarray:
        """Points of level k+1 that are new relative to level k."""
        return np.setdiff1d(self.level(k + 1), self.level(k))

    def position(self, k: int, points) -> np.ndarray:
        """Positions of the given point ids within the sorted level-k array."""
        lev = self.level(k)
        pos = np.searchsorted(lev, points)
        if np.any(lev[pos] != points):
            raise KeyError("point not on the requested level")
        return pos


def _greedy_extend(dist: np.ndarray, base: list[int], candidates, sep: float) -> list[int]:
    chosen = list(base)
    for i in candidates:
        if i in chosen:
            continue
        if all(dist[i, j] >= sep for j in chosen):
            chosen.append(i)
    return sorted(chosen)


def build_nets(space: FiniteSpace, constants: SpaceConstants, delta: float,
               mode: str = "relaxed") -> NetHierarchy:
    """Greedy nested nets for all scales from one root point down to all of X."""
    if not 0 < delta < 1:
        raise NetError("delta must lie in (0, 1)")
    if mode not in ("strict", "relaxed"):
        raise NetError(f"unknown mode {mode!r}")
    if mode == "strict":
        bound = STRICT_DELTA_COEFF * constants.A0**-10
        if delta > bound:
            raise NetError(
                f"strict mode requires delta <= {bound:.3g}, got {delta}"
            )
    n = space.n
    dist = space.dist
    ids = range(n)

    level0 = _greedy_extend(dist, [], ids, 1.0)
    finer = [level0]
    k = 0
    while len(finer[-1]) < n:
        k += 1
        finer.append(_greedy_extend(dist, finer[-1], ids, delta**k))
    k_fine = k

    coarser = []
    k = 0
    current = level0
    while len(current) > 1:
        k -= 1
        current = _greedy_extend(dist, [], current, delta**k)
        coarser.append(current)
    k_coarse = k

    all_levels = list(reversed(coarser)) + finer
    # normalize: k_fine is the smallest level that already exhausts the space
    while len(all_levels) > 1 and len(all_levels[-2]) == n:
        all_levels.pop()
        k_fine -= 1
    levels = tuple(np.asarray(lv, dtype=int) for lv in all_levels)
    h = NetHierarchy(delta=delta, k_coarse=k_coarse, k_fine=k_fine, levels=levels)
    report = verify_nets(space, constants, h)
    if not report.ok:
        raise GeometryViolation("net covering/separation failed: "
                                + "; ".join(report.failures))
    return h


@dataclass(frozen=True)
class NetVerification:
    rows: tuple  # (k, separation_worst, covering_worst, covering_bound, ok)
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_nets(space: FiniteSpace, constants: SpaceConstants,
                h: NetHierarchy) -> NetVerification:
    """Check separation >= delta^k within levels and covering < 2 A0 delta^k."""
    rows = []
    failures = []
    a0 = constants.A0
    for k in range(h.k_coarse, h.k_fine + 1):
        lev = h.level(k)
        sep_req = h.scale(k)
        if lev.size > 1:
            sub = space.dist[np.ix_(lev, lev)]
            off = sub[~np.eye(lev.size, dtype=bool)]
            sep_worst = float(off.min())
        else:
            sep_worst = math.inf
        cov_worst = float(space.dist[:, lev].min(axis=1).max())
        cov_bound = 2.0 * a0 * sep_req
        ok = sep_worst >= sep_req and cov_worst < cov_bound
        rows.append((k, sep_worst, cov_worst, cov_bound, ok))
        if sep_worst < sep_req:
            failures.append(f"level {k}: separation {sep_worst} < {sep_req}")
        if cov_worst >= cov_bound:
            failures.append(f"level {k}: covering {cov_worst} >= {cov_bound}")
        if k > h.k_coarse:
            prev = h.level(k - 1)
            if not np.all(np.isin(prev, lev)):
                failures.append(f"level {k - 1} not nested in level {k}")
    if not np.array_equal(h.level(h.k_fine), np.arange(space.n)):
        failures.append("finest level does not exhaust the space")
    if h.level(h.k_coarse).size != 1:
        failures.append("coarsest level is not a single point")
    return NetVerification(rows=tuple(rows), failures=tuple(failures))


@dataclass(frozen=True)
class ReferenceOrder:
    """Parent maps between consecutive levels plus neighbour and label data.

    Internally everything is indexed by position within the sorted level
    arrays of the hierarchy it was built from.
    """

    k_coarse: int
    k_fine: int
    parents: tuple      # parents[i]: level k_coarse+i+1 position -> level k_coarse+i position
    children: tuple     # children[i][alpha]: positions at level k_coarse+i+1
    neighbours: tuple   # neighbours[i][alpha]: same-level positions (k in [k_coarse, k_fine-1])
    label1: tuple       # label1[i][alpha] in {0..L}, levels k_coarse..k_fine-1
    label2: tuple       # label2[i][beta] in {1..M} for level k_coarse+1+i points
    L: int
    M: int

    def parent_at(self, k: int) -> np.ndarray:
        return self.parents[k - self.k_coarse]

    def children_at(self, k: int):
        return self.children[k - self.k_coarse]

    def neighbours_at(self, k: int):
        return self.neighbours[k - self.k_coarse]

    def label1_at(self, k: int) -> np.ndarray:
        return self.label1[k - self.k_coarse]

    def label2_at(self, k: int) -> np.ndarray:
        """Sibling labels of the level-k points (k > k_coarse)."""
        return self.label2[k - self.k_coarse - 1]


def build_reference_order(space: FiniteSpace, constants: SpaceConstants,
                          h: NetHierarchy) -> ReferenceOrder:
    a0 = constants.A0
    parents = []
    children = []
    neighbours = []
    label1 = []
    label2 = []
    L = 0
    M = 1
    for k in range(h.k_coarse, h.k_fine):
        lev = h.level(k)
        nxt = h.level(k + 1)
        dk = h.scale(k)
        d_sub = space.dist[np.ix_(nxt, lev)]
        parent = np.argmin(d_sub, axis=1)  # first minimum = lowest id (sorted level)
        dmin = d_sub[np.arange(nxt.size), parent]
        if np.any(dmin >= 2.0 * a0 * dk):
            bad = int(np.argmax(dmin))
            raise GeometryViolation(
                f"child {nxt[bad]} at level {k + 1} has no parent within 2*A0*delta^{k}"
            )
        close = d_sub < dk / (2.0 * a0)
        counts = close.sum(axis=1)
        if np.any(counts > 1):
            bad = int(np.argmax(counts))
            raise GeometryViolation(
                f"child {nxt[bad]} has several near parents at level {k}"
            )
        forced = np.nonzero(counts == 1)[0]
        if not np.array_equal(parent[forced], np.argmax(close[forced], axis=1)):
            raise GeometryViolation("near parent is not the nearest parent")
        parents.append(parent)

        kids = [np.nonzero(parent == a)[0] for a in range(lev.size)]
        children.append(tuple(kids))
        M = max(M, max((len(c) for c in kids), default=1))

        # ``beta`` and ``gamma`` are neighbours when they own children closer
        # than (2 A0)^-1 delta^k to each other.
        thr = dk / (2.0 * a0)
        nbrs = [[] for _ in range(lev.size)]
        child_pts = [nxt[c] for c in kids]
        for a in range(lev.size):
            if not len(child_pts[a]):
                continue
            for b in range(a + 1, lev.size):
                if not len(child_pts[b]):
                    continue
                block = space.dist[np.ix_(child_pts[a], child_pts[b])]
                if block.min() < thr:
                    if space.dist[lev[a], lev[b]] >= 5.0 * a0**3 * dk:
                        raise GeometryViolation(
                            f"neighbours {lev[a]},{lev[b]} at level {k} too far apart"
                        )
                    nbrs[a].append(b)
                    nbrs[b].append(a)
        nbrs = tuple(np.asarray(v, dtype=int) for v in nbrs)
        neighbours.append(nbrs)
        L = max(L, max((v.size for v in nbrs), default=0))

        colors = np.full(lev.size, -1, dtype=int)
        for a in range(lev.size):
            used = {colors[b] for b in nbrs[a] if colors[b] >= 0}
            c = 0
            while c in used:
                c += 1
            colors[a] = c
        label1.append(colors)

        lab2 = np.zeros(nxt.size, dtype=int)
        for a in range(lev.size):
            for rank, pos in enumerate(kids[a], start=1):
                lab2[pos] = rank
        label2.append(lab2)

    for colors in label1:
        if colors.size and colors.max() > L:
            raise GeometryViolation("greedy coloring exceeded the neighbour count")

    return ReferenceOrder(
        k_coarse=h.k_coarse,
        k_fine=h.k_fine,
        parents=tuple(parents),
        children=tuple(children),
        neighbours=tuple(neighbours),
        label1=tuple(label1),
        label2=tuple(label2),
        L=L,
        M=M,
    )


def reference_cubes(h: NetHierarchy, order: ReferenceOrder) -> dict:
    """Ancestor position of every point at every level under the reference order."""
    n = h.level(h.k_fine).size
    anc = {h.k_fine: np.arange(n)}
    current = anc[h.k_fine]
    for k in range(h.k_fine - 1, h.k_coarse - 1, -1):
        current = order.parent_at(k)[current]
        anc[k] = current
    return anc


# ---------------------------------------------------------------------------
# Net files
# ---------------------------------------------------------------------------


def save_nets(h: NetHierarchy, order: ReferenceOrder, path) -> None:
    payload = {
        "delta": h.delta,
        "k_coarse": h.k_coarse,
        "k_fine": h.k_fine,
        "levels": [lv.tolist() for lv in h.levels],
        "parents": [p.tolist() for p in order.parents],
        "neighbours": [[v.tolist() for v in lvl] for lvl in order.neighbours],
        "label1": [v.tolist() for v in order.label1],
        "label2": [v.tolist() for v in order.label2],
        "L": order.L,
        "M": order.M,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_nets(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetError(f"net file parse error: {exc}") from exc
    h = NetHierarchy(
        delta=float(data["delta"]),
        k_coarse=int(data["k_coarse"]),
        k_fine=int(data["k_fine"]),
        levels=tuple(np.asarray(lv, dtype=int) for lv in data["levels"]),
    )
    if not 0 < h.delta < 1:
        raise NetError("net file invariant violated: delta outside (0, 1)")
    if h.num_levels != len(h.levels):
        raise NetError("net file invariant violated: level count vs k range")
    for i in range(len(h.levels) - 1):
        if not np.all(np.isin(h.levels[i], h.levels[i + 1])):
            raise NetError(
                f"net file invariant violated: level {h.k_coarse + i} "
                f"not nested in level {h.k_coarse + i + 1}")
    parents = tuple(np.asarray(p, dtype=int) for p in data["parents"])
    if len(parents) != h.num_levels - 1:
        raise NetError("net file invariant violated: parent map count")
    children = []
    for i, p in enumerate(parents):
        size = h.levels[i].size
        if p.shape != (h.levels[i + 1].size,) or p.min() < 0 or p.max() >= size:
            raise NetError(
                f"net file invariant violated: parent map at level "
                f"{h.k_coarse + i} is not a map onto the coarser level")
        children.append(tuple(np.nonzero(p == a)[0] for a in range(size)))
    order = ReferenceOrder(
        k_coarse=h.k_coarse,
        k_fine=h.k_fine,
        parents=parents,
        children=tuple(children),
        neighbours=tuple(
            tuple(np.asarray(v, dtype=int) for v in lvl)
            for lvl in data["neighbours"]
        ),
        label1=tuple(np.asarray(v, dtype=int) for v in data["label1"]),
        label2=tuple(np.asarray(v, dtype=int) for v in data["label2"]),
        L=int(data["L"]),
        M=int(data["M"]),
    )
    return h, order

"""Finite quasi-metric measure spaces and their structural constants.

A space is a finite point set with an explicit symmetric quasi-distance
matrix and strictly positive point masses.  Balls are always open:
B(x, r) = {y : d(x, y) < r}.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "FiniteSpace",
    "SpaceConstants",
    "ValidationError",
    "ball",
    "volume",
    "canonical_radii",
    "compute_constants",
    "generate_space",
    "resolve_space",
    "load_space",
    "save_space",
    "FIXTURES",
]


class ValidationError(ValueError):
    """A space (or space file) violates a structural invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteSpace:
    """Point set with quasi-distance matrix and positive measure weights."""

    dist: np.ndarray
    weights: np.ndarray
    coords: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValidationError("distance matrix must be square")
        n = dist.shape[0]
        if n < 1:
            raise ValidationError("space needs at least one point")
        if weights.shape != (n,):
            raise ValidationError("weights length must match point count")
        if not np.all(np.isfinite(dist)):
            raise ValidationError("distances must be finite")
        if np.any(dist < 0):
            i, j = np.argwhere(dist < 0)[0]
            raise ValidationError(f"negative distance at ({i},{j})")
        asym = np.argwhere(dist != dist.T)
        if asym.size:
            i, j = asym[0]
            raise ValidationError(f"asymmetric distances at ({i},{j})")
        if np.any(np.diag(dist) != 0.0):
            i = int(np.argwhere(np.diag(dist) != 0.0)[0])
            raise ValidationError(f"nonzero self-distance at index {i}")
        off = dist + np.eye(n)
        zeros = np.argwhere(off == 0.0)
        if zeros.size:
            i, j = zeros[0]
            raise ValidationError(f"distinct points at distance zero: ({i},{j})")
        bad_w = np.argwhere(~(weights > 0))
        if bad_w.size:
            i = int(bad_w[0, 0])
            raise ValidationError(f"weight must be positive at index {i}")
        object.__setattr__(self, "dist", _freeze(dist))
        object.__setattr__(self, "weights", _freeze(weights))
        if self.coords is not None:
            object.__setattr__(
                self, "coords", _freeze(np.asarray(self.coords, dtype=float))
            )

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diam(self) -> float:
        return float(self.dist.max())

    @property
    def min_sep(self) -> float:
        if self.n == 1:
            return math.inf
        n = self.n
        off = self.dist[~np.eye(n, dtype=bool)]
        return float(off.min())

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def ball(self, x: int, r: float) -> np.ndarray:
        """Open ball: ids y with dist(x, y) < r."""
        if r <= 0:
            raise ValueError("ball radius must be positive")
        return np.nonzero(self.dist[x] < r)[0]

    def volume(self, x: int, r: float) -> float:
        if r <= 0:
            raise ValueError("ball radius must be positive")
        return float(self.weights[self.dist[x] < r].sum())

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Weighted inner product <f, g> = sum f(x) g(x) mu({x})."""
        return float(np.dot(np.asarray(f) * self.weights, np.asarray(g)))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))

    def gram(self, F: np.ndarray, G: np.ndarray) -> np.ndarray:
        """All pairwise weighted inner products of rows of F against rows of G."""
        return np.asarray(F) @ (np.asarray(G) * self.weights).T

    def mean(self, f: np.ndarray) -> float:
        return self.inner(f, np.ones(self.n)) / self.total_mass

    def rescale(self, factor: float) -> "FiniteSpace":
        """Same points with every distance multiplied by ``factor``."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return FiniteSpace(
            dist=self.dist * factor,
            weights=self.weights.copy(),
            coords=None if self.coords is None else self.coords.copy(),
            name=f"{self.name}*{factor:g}" if self.name else "",
        )

    def power(self, s: float) -> "FiniteSpace":
        """Snowflaked space with distance dist**s, 0 < s <= 1."""
        if not 0 < s <= 1:
            raise ValueError("power must lie in (0, 1]")
        return FiniteSpace(
            dist=self.dist**s,
            weights=self.weights.copy(),
            name=f"{self.name}^{s:g}" if self.name else "",
        )


def ball(space: FiniteSpace, x: int, r: float) -> np.ndarray:
    return space.ball(x, r)


def volume(space: FiniteSpace, x: int, r: float) -> float:
    return space.volume(x, r)


def canonical_radii(space: FiniteSpace) -> np.ndarray:
    """Sorted distinct positive distances plus one value beyond the diameter.

    Every ball B(x, r), r > 0, equals B(x, r') for some canonical r', so all
    ball-indexed suprema can be scanned over this finite set.
    """
    pos = np.unique(space.dist)
    pos = pos[pos > 0]
    beyond = (float(pos[-1]) if pos.size else 0.0) + 1.0
    return np.append(pos, beyond)


# ---------------------------------------------------------------------------
# Structural constants
# ---------------------------------------------------------------------------

_EXACT_PACKING_CAP = 2048


@dataclass(frozen=True)
class SpaceConstants:
    """Quasi-triangle constant, geometric doubling count and measure doubling."""

    A0: float
    N_geo: int
    N_geo_exact: bool
    diam: float
    min_sep: float
    a0_witness: tuple[int, int, int] | None
    _space: FiniteSpace = field(repr=False, compare=False)
    _cmu_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def cmu(self, t: float) -> float:
        """Exact sup over balls of mu(B(x, t r)) / mu(B(x, r)), t >= 1."""
        if t < 1:
            raise ValueError("expansion factor must be >= 1")
        key = float(t)
        if key not in self._cmu_cache:
            self._cmu_cache[key] = _cmu_exact(self._space, key)
        return self._cmu_cache[key]


def _quasi_triangle_constant(space: FiniteSpace):
    n = space.n
    if n < 3:
        return 1.0, None
    d = space.dist
    best = 1.0
    witness = None
    for z in range(n):
        sums = d[:, z][:, None] + d[z, :][None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(sums > 0, d / sums, 0.0)
        ratios[z, :] = 0.0
        ratios[:, z] = 0.0
        np.fill_diagonal(ratios, 0.0)
        idx = np.unravel_index(np.argmax(ratios), ratios.shape)
        if ratios[idx] > best:
            best = float(ratios[idx])
            witness = (int(idx[0]), int(idx[1]), z)
    return best, witness


def _cmu_exact(space: FiniteSpace, t: float) -> float:
    # Breakpoints of r -> mu(B(x,tr))/mu(B(x,r)) are the distances and the
    # distances divided by t; the sup over r > 0 is attained on them.
    pos = np.unique(space.dist)
    pos = pos[pos > 0]
    if pos.size == 0:
        return 1.0
    radii = np.unique(np.concatenate([pos, pos / t, [pos[-1] + 1.0]]))
    best = 1.0
    w = space.weights
    for x in range(space.n):
        row = space.dist[x]
        order = np.argsort(row, kind="stable")
        sorted_d = row[order]
        cumw = np.cumsum(w[order])
        # mass of {d < r} via binary search on the sorted row
        vol = cumw[np.searchsorted(sorted_d, radii, side="left") - 1]
        vol_t = cumw[np.searchsorted(sorted_d, t * radii, side="left") - 1]
        best = max(best, float((vol_t / vol).max()))
    return best


def _greedy_packing(conflict: np.ndarray) -> int:
    available = np.ones(conflict.shape[0], dtype=bool)
    count = 0
    while True:
        idx = np.argmax(available)
        if not available[idx]:
            break
        count += 1
        available &= ~conflict[idx]
        available[idx] = False
    return count


def _max_independent_set(adj: list[int], verts: int, best: int) -> int:
    """Size of the maximum independent set of the conflict graph (bitsets).

    Simplicial vertices (whose live neighbourhood is a clique) are taken
    greedily, which solves interval-type conflict graphs without branching;
    otherwise branch on a maximum-degree vertex with an incumbent bound.
    """
    size = 0
    while verts:
        count = bin(verts).count("1")
        if size + count <= best:
            return 0
        best_v = -1
        max_deg = -1
        min_v = -1
        min_deg = count
        m = verts
        while m:
            u = (m & -m).bit_length() - 1
            deg = bin(adj[u] & verts).count("1")
            if deg > max_deg:
                max_deg = deg
                best_v = u
            if deg < min_deg:
                min_deg = deg
                min_v = u
            m &= m - 1
        if max_deg == 0:
            return size + count
        nb = adj[min_v] & verts
        clique = True
        mm = nb
        while mm:
            u = (mm & -mm).bit_length() - 1
            if (adj[u] & nb) != (nb & ~(1 << u)):
                clique = False
                break
            mm &= mm - 1
        if clique:
            # taking a simplicial vertex is always optimal
            size += 1
            verts &= ~((1 << min_v) | nb)
            continue
        v = best_v
        with_v = 1 + _max_independent_set(adj, verts & ~((1 << v) | adj[v]),
                                          best - size - 1)
        without_v = _max_independent_set(adj, verts & ~(1 << v),
                                         max(best - size, with_v))
        return size + max(with_v, without_v)
    return size


def _geometric_doubling(space: FiniteSpace):
    """Largest packing of any ball by points pairwise farther than half its radius."""
    n = space.n
    if n == 1:
        return 1, True
    exact = n <= _EXACT_PACKING_CAP
    radii = canonical_radii(space)
    best = 1
    for x in range(n):
        row = space.dist[x]
        sizes = np.searchsorted(np.sort(row), radii, side="left")
        prev_size = -1
        for r, size in zip(radii, sizes):
            # same ball with a larger radius only strengthens the separation
            if size == prev_size or size <= best:
                continue
            prev_size = int(size)
            members = np.nonzero(row < r)[0]
            sub = space.dist[np.ix_(members, members)]
            conflict = sub <= r / 2.0
            np.fill_diagonal(conflict, False)
            best = max(best, _greedy_packing(conflict))
            if not exact or members.size <= best:
                continue
            adj = [int.from_bytes(
                np.packbits(conflict[i], bitorder="little").tobytes(), "little")
                for i in range(members.size)]
            best = max(best, _max_independent_set(adj, (1 << members.size) - 1, best))
    return best, exact


def compute_constants(space: FiniteSpace) -> SpaceConstants:
    """Exact A0 (max over ordered triples), geometric doubling count and extremes."""
    a0, witness = _quasi_triangle_constant(space)
    n_geo, exact = _geometric_doubling(space)
    return SpaceConstants(
        A0=a0,
        N_geo=n_geo,
        N_geo_exact=exact,
        diam=space.diam,
        min_sep=space.min_sep,
        a0_witness=witness,
        _space=space,
    )


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

FIXTURES = {
    "FIX-A": "line(4, weights=counting)",
    "FIX-B": "cycle(16, weights=uniform)",
}


def _weights_for(rule, n: int) -> np.ndarray:
    if rule is None or rule == "counting":
        return np.ones(n)
    if rule == "uniform":
        return np.full(n, 1.0 / n)
    arr = np.asarray(rule, dtype=float)
    if arr.shape != (n,):
        raise ValidationError("per-point weight list has wrong length")
    return arr


def _from_coords_1d(coords: np.ndarray, power: float = 1.0) -> np.ndarray:
    diff = np.abs(coords[:, None] - coords[None, :])
    return diff**power


def _gen_line(n: int, scale: float = 1.0, weights=None) -> FiniteSpace:
    if n < 1:
        raise ValidationError("line needs n >= 1")
    coords = np.arange(n, dtype=float)
    return FiniteSpace(
        dist=_from_coords_1d(coords) * scale,
        weights=_weights_for(weights, n),
        coords=coords[:, None] * scale,
        name=f"line({n})",
    )


def _gen_cycle(n: int, scale=None, weights=None) -> FiniteSpace:
    if n < 1:
        raise ValidationError("cycle needs n >= 1")
    if scale is None:
        scale = 1.0 / n
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    circ = np.minimum(diff, n - diff).astype(float)
    return FiniteSpace(
        dist=circ * scale,
        weights=_weights_for(weights, n),
        name=f"cycle({n})",
    )


def _gen_grid(m: int, dim: int, metric: str = "linf", weights=None) -> FiniteSpace:
    if m < 1 or dim < 1:
        raise ValidationError("grid needs m >= 1 and dim >= 1")
    axes = [np.arange(m, dtype=float)] * dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    diff = pts[:, None, :] - pts[None, :, :]
    if metric == "linf":
        dist = np.abs(diff).max(axis=-1)
    elif metric == "l2":
        dist = np.sqrt((diff**2).sum(axis=-1))
    else:
        raise ValidationError(f"unknown grid metric {metric!r}")
    dist = np.minimum(dist, dist.T)
    return FiniteSpace(dist=dist, weights=_weights_for(weights, len(pts)),
                       coords=pts, name=f"grid({m},{dim})")


def _gen_power_line(n: int, r: float, weights=None) -> FiniteSpace:
    if n < 1:
        raise ValidationError("power_line needs n >= 1")
    if r < 1:
        raise ValidationError("power_line exponent must satisfy r >= 1")
    coords = np.arange(n, dtype=float)
    return FiniteSpace(
        dist=_from_coords_1d(coords, power=r),
        weights=_weights_for(weights, n),
        coords=coords[:, None],
        name=f"power_line({n},{r:g})",
    )


def _gen_two_cluster(n: int, gap: float, weights=None) -> FiniteSpace:
    if n < 2:
        raise ValidationError("two_cluster needs n >= 2")
    if gap <= 0:
        raise ValidationError("two_cluster gap must be positive")
    h = (n + 1) // 2
    coords = np.concatenate([np.arange(h, dtype=float),
                             gap + np.arange(n - h, dtype=float)])
    return FiniteSpace(
        dist=_from_coords_1d(coords),
        weights=_weights_for(weights, n),
        coords=coords[:, None],
        name=f"two_cluster({n},{gap:g})",
    )


def _gen_tree(depth: int, weights=None) -> FiniteSpace:
    """Complete binary tree of the given depth with shortest-path edge metric."""
    if depth < 0:
        raise ValidationError("tree depth must be >= 0")
    n = 2 ** (depth + 1) - 1
    dist = np.zeros((n, n))

    def ancestors(i):
        chain = [i]
        while i > 0:
            i = (i - 1) // 2
            chain.append(i)
        return chain

    anc = [ancestors(i) for i in range(n)]
    depths = [len(a) - 1 for a in anc]
    for i in range(n):
        seti = set(anc[i])
        for j in range(i + 1, n):
            common = next(a for a in anc[j] if a in seti)
            d = depths[i] + depths[j] - 2 * depths[common]
            dist[i, j] = dist[j, i] = float(d)
    return FiniteSpace(dist=dist, weights=_weights_for(weights, n),
                       name=f"tree({depth})")


def _gen_random_cloud(n: int, dim: int, seed: int, weights=None) -> FiniteSpace:
    if n < 1 or dim < 1:
        raise ValidationError("random_cloud needs n >= 1 and dim >= 1")
    rng = np.random.default_rng(int(seed))
    pts = rng.uniform(size=(n, dim))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)
    return FiniteSpace(dist=dist, weights=_weights_for(weights, n),
                       coords=pts, name=f"random_cloud({n},{dim},{seed})")


_GENERATORS = {
    "line": _gen_line,
    "cycle": _gen_cycle,
    "grid": _gen_grid,
    "power_line": _gen_power_line,
    "two_cluster": _gen_two_cluster,
    "tree": _gen_tree,
    "random_cloud": _gen_random_cloud,
}


def _parse_value(text: str):
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def generate_space(descriptor: str) -> FiniteSpace:
    """Build a space from a descriptor such as ``cycle(16, weights=uniform)``."""
    descriptor = descriptor.strip()
    if "(" not in descriptor or not descriptor.endswith(")"):
        raise ValidationError(f"malformed generator descriptor {descriptor!r}")
    name, _, rest = descriptor.partition("(")
    name = name.strip()
    if name not in _GENERATORS:
        raise ValidationError(f"unknown generator {name!r}")
    args, kwargs = [], {}
    body = rest[:-1].strip()
    if body:
        for part in body.split(","):
            if "=" in part:
                key, _, val = part.partition("=")
                kwargs[key.strip()] = _parse_value(val)
            else:
                args.append(_parse_value(part))
    return _GENERATORS[name](*args, **kwargs)


def resolve_space(text: str) -> FiniteSpace:
    """Fixture name, generator descriptor, or path to a space file."""
    if text in FIXTURES:
        return generate_space(FIXTURES[text])
    if "(" in text:
        return generate_space(text)
    path = Path(text)
    if path.exists():
        return load_space(path)
    raise ValidationError(f"cannot resolve space {text!r}")


# ---------------------------------------------------------------------------
# Space files
# ---------------------------------------------------------------------------


def load_space(path) -> FiniteSpace:
    """Read and validate a space file (see save_space for the layout)."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"space file parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("space file must hold a single object")
    metric = data.get("metric", "explicit")
    scale = float(data.get("scale", 1.0))
    n = data.get("n")
    coords = None
    if metric == "explicit":
        if "distances" not in data:
            raise ValidationError("explicit metric requires a distances matrix")
        dist = np.asarray(data["distances"], dtype=float) * scale
        if n is not None and dist.shape != (n, n):
            raise ValidationError("distances shape disagrees with n")
    elif metric == "euclidean":
        if "coords" not in data:
            raise ValidationError("euclidean metric requires coords")
        coords = np.asarray(data["coords"], dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1)) * scale
        dist = np.minimum(dist, dist.T)
        np.fill_diagonal(dist, 0.0)
    elif metric == "power":
        if "coords" not in data or "r" not in data:
            raise ValidationError("power metric requires coords and r")
        coords = np.asarray(data["coords"], dtype=float).reshape(-1)
        dist = _from_coords_1d(coords, power=float(data["r"])) * scale
        coords = coords[:, None]
    else:
        raise ValidationError(f"unknown metric kind {metric!r}")
    m = dist.shape[0]
    weights = data.get("weights")
    if weights is None:
        weights = np.ones(m)
    return FiniteSpace(dist=dist, weights=np.asarray(weights, dtype=float),
                       coords=coords, name=str(data.get("name", "")))


def save_space(space: FiniteSpace, path) -> None:
    payload = {
        "n": space.n,
        "metric": "explicit",
        "distances": space.dist.tolist(),
        "weights": space.weights.tolist(),
        "scale": 1.0,
        "name": space.name,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")

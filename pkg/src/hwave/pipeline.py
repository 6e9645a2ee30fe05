"""End-to-end orchestration: build every stage, verify, write artifacts."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as an
from .mra import build_gram_system, neumann_inverse_and_sqrt
from .nets import (NetHierarchy, ReferenceOrder, build_nets,
                   build_reference_order, save_nets, verify_nets)
from .randomized import (CubeMachine, sample_omega, save_system,
                         theoretical_eta, verify_center_sandwich, verify_system)
from .report import check_error, check_flag, format_report, write_report
from .space import (FiniteSpace, SpaceConstants, compute_constants,
                    resolve_space, save_space)
from .splines import (build_transitions, compute_splines_exact,
                      compute_splines_mc, verify_spline_table)
from .wavelets import (WaveletBasis, assemble_basis, kernel_of_projection,
                       save_basis)

__all__ = ["PipelineConfig", "Bundle", "PipelineResult", "build_bundle",
           "run_pipeline", "SUITES"]

SUITES = ("nets", "cubes", "splines", "mra", "wavelets", "analysis")


@dataclass(frozen=True)
class PipelineConfig:
    space: str
    delta: float = 0.25
    mode: str = "relaxed"
    seed: int = 1
    nsamples: int = 1000
    out: str | None = None
    suites: tuple = SUITES

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.nsamples < 1:
            raise ValueError("nsamples must be >= 1")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ValueError(f"unknown suites: {sorted(unknown)}")


@dataclass
class Bundle:
    """Everything the pipeline builds, in dependency order."""

    space: FiniteSpace
    constants: SpaceConstants
    hierarchy: NetHierarchy
    order: ReferenceOrder
    machine: CubeMachine
    transitions: object
    splines: object
    gramsys: object
    basis: WaveletBasis
    eta: float


def build_bundle(space: FiniteSpace, delta: float, mode: str = "relaxed") -> Bundle:
    constants = compute_constants(space)
    hierarchy = build_nets(space, constants, delta, mode)
    order = build_reference_order(space, constants, hierarchy)
    machine = CubeMachine(space, constants, hierarchy, order)
    transitions = build_transitions(machine)
    splines = compute_splines_exact(hierarchy, transitions)
    gramsys = build_gram_system(space, constants, hierarchy, splines)
    basis = assemble_basis(space, hierarchy, splines, gramsys)
    return Bundle(space=space, constants=constants, hierarchy=hierarchy,
                  order=order, machine=machine, transitions=transitions,
                  splines=splines, gramsys=gramsys, basis=basis,
                  eta=theoretical_eta(order, delta))


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


def _suite_nets(b: Bundle):
    rep = verify_nets(b.space, b.constants, b.hierarchy)
    checks = []
    for k, sep_worst, cov_worst, cov_bound, ok in rep.rows:
        dk = b.hierarchy.scale(k)
        checks.append(check_flag(
            f"net-separation level {k}",
            f"min pair distance {sep_worst:.4g} vs scale {dk:.4g}",
            sep_worst >= dk))
        checks.append(check_error(
            f"net-covering level {k}",
            f"worst distance to net {cov_worst:.4g}",
            cov_worst, cov_bound))
    checks.append(check_flag("net-structure", "nesting, coarse root, finest level",
                             rep.ok))
    return checks


def _suite_cubes(b: Bundle, seed: int):
    omega = sample_omega(b.order, seed)
    system = b.machine.system(omega)
    rep = verify_system(b.space, b.constants, b.hierarchy, b.order, system)
    centre = verify_center_sandwich(b.space, b.constants, b.hierarchy, system)
    checks = [
        check_flag("cube-geometry", f"seed {seed}: partition, tiling, sandwiches",
                   rep.ok),
        check_flag("cube-centre-sandwich", f"seed {seed}", centre.ok),
    ]
    for name, ok, detail in centre.checks:
        checks.append(check_flag(name, detail, ok))
    return checks


def _suite_splines(b: Bundle, seed: int, nsamples: int):
    rep = verify_spline_table(b.space, b.constants, b.hierarchy,
                              b.transitions, b.splines)
    checks = [check_flag(name, detail, ok) for name, ok, detail in rep.checks]
    mc, _ = compute_splines_mc(b.machine, nsamples, seed)
    dev = max(float(np.abs(mc.at(k) - b.splines.at(k)).max())
              for k in range(b.hierarchy.k_coarse, b.hierarchy.k_fine + 1))
    tol = max(0.01, 5.0 * math.sqrt(0.25 / nsamples))
    checks.append(check_error("spline-sampling-agreement",
                              f"{nsamples} draws, max entry deviation {dev:.3g}",
                              dev, tol))
    return checks


def _suite_mra(b: Bundle, rng: np.random.Generator):
    checks = []
    h = b.hierarchy
    for k in range(h.k_coarse, h.k_fine + 1):
        lv = b.gramsys.at(k)
        n = lv.M.shape[0]
        err_inv = float(np.abs(lv.Minv @ lv.M - np.eye(n)).max())
        err_sqrt = float(np.abs(lv.Misqrt @ lv.Misqrt @ lv.M - np.eye(n)).max())
        checks.append(check_error(f"gram-inverse level {k}", "residual of M^-1 M",
                                  err_inv, 1e-10))
        checks.append(check_error(f"gram-inverse-sqrt level {k}",
                                  "residual of (M^-1/2)^2 M", err_sqrt, 1e-10))
        ninv, nsqrt, r, terms = neumann_inverse_and_sqrt(lv.M)
        agree = max(float(np.abs(ninv - lv.Minv).max()),
                    float(np.abs(nsqrt - lv.Misqrt).max()))
        checks.append(check_error(
            f"series-vs-eigen level {k}",
            f"ratio {r:.3g}, {terms} terms", agree, 1e-10))
        lo, hi = lv.riesz
        worst = 0.0
        for _ in range(100):
            lam = rng.normal(size=n)
            f = lam @ b.splines.at(k)
            lhs = b.space.inner(f, f)
            mass = float((lam**2 * lv.volumes).sum())
            worst = max(worst,
                        (lo * mass - lhs) / max(lhs, 1e-30),
                        (lhs - hi * mass) / max(lhs, 1e-30))
        checks.append(check_error(f"riesz-bounds level {k}",
                                  f"[{lo:.4g}, {hi:.4g}] on 100 random vectors",
                                  worst, 1e-10))
    return checks


def _suite_wavelets(b: Bundle, rng: np.random.Generator):
    checks = []
    basis = b.basis
    n = b.space.n
    gram = b.space.gram(basis.values, basis.values)
    checks.append(check_error("basis-orthonormality", "Gram vs identity",
                              float(np.abs(gram - np.eye(n)).max()), 1e-8))
    means = basis.wavelet_values @ b.space.weights
    checks.append(check_error("wavelet-vanishing-means", "max |integral|",
                              float(np.abs(means).max()) if means.size else 0.0,
                              1e-10))
    checks.append(check_flag("basis-count", f"{basis.n_members} members for {n} points",
                             basis.n_members == n))
    worst = 0.0
    for _ in range(100):
        f = rng.normal(size=n)
        c = basis.analyze(f)
        worst = max(worst,
                    abs(float((c**2).sum()) - b.space.inner(f, f))
                    / max(b.space.inner(f, f), 1e-30))
    checks.append(check_error("parseval", "100 random functions, relative",
                              worst, 1e-8))
    h = b.hierarchy
    tele = 0.0
    for k in range(h.k_coarse, h.k_fine):
        P_k = kernel_of_projection(b.space, b.gramsys, basis, k, "P")
        Q_k = kernel_of_projection(b.space, b.gramsys, basis, k, "Q")
        P_next = kernel_of_projection(b.space, b.gramsys, basis, k + 1, "P")
        tele = max(tele, float(np.abs(P_next - P_k - Q_k).max()))
    checks.append(check_error("projection-telescoping", "P_{k+1} = P_k + Q_k",
                              tele, 1e-10))
    return checks


def _suite_analysis(b: Bundle, rng: np.random.Generator):
    checks = []
    space, constants = b.space, b.constants
    radii = an.canonical_radii(space)
    ok = True
    for x in range(space.n):
        for i, r in enumerate(radii):
            for R in radii[i + 1:]:
                try:
                    an.empty_annulus_dichotomy(space, constants, x, float(r), float(R))
                except AssertionError:
                    ok = False
    checks.append(check_flag("volume-annulus-dichotomy",
                             "all points and canonical radius pairs", ok))
    worst = 0.0
    for _ in range(3):
        f = rng.normal(size=space.n)
        rt = an.bmo_carleson_roundtrip(space, b.hierarchy, b.order, b.basis, f)
        worst = max(worst, rt.residual)
    checks.append(check_error("oscillation-coefficient-roundtrip",
                              "reconstruction modulo constants", worst, 1e-8))
    beta = rng.normal(size=space.n)
    P = an.paraproduct_matrix(space, b.hierarchy, b.splines, b.basis, beta)
    err = float(np.abs(P @ np.ones(space.n) - (beta - space.mean(beta))).max())
    checks.append(check_error("paraproduct-unit-image", "applied to constant 1",
                              err, 1e-8))
    if b.basis.is_wavelet.any():
        signs = rng.choice([-1.0, 1.0], size=int(b.basis.is_wavelet.sum()))
        W = b.basis.wavelet_values
        sq = np.sqrt(space.weights)
        symmetrized = sq[:, None] * (W.T @ (signs[:, None] * W)) * sq[None, :]
        norm = an.operator_norm(symmetrized)
        checks.append(check_error("sign-multiplier-contraction",
                                  "operator norm of a random sign flip",
                                  abs(norm - 1.0), 1e-8))
    return checks


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


@dataclass
class PipelineResult:
    config: PipelineConfig
    bundle: Bundle
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        return format_report(self.checks)


def _write_artifacts(result: PipelineResult, out: Path, seed: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    b = result.bundle
    save_space(b.space, out / "space.json")
    constants = {
        "A0": b.constants.A0,
        "N_geo": b.constants.N_geo,
        "N_geo_exact": b.constants.N_geo_exact,
        "diam": b.constants.diam,
        "min_sep": b.constants.min_sep if math.isfinite(b.constants.min_sep) else None,
        "cmu2": b.constants.cmu(2.0),
        "eta": b.eta if math.isfinite(b.eta) else None,
    }
    (out / "constants.json").write_text(json.dumps(constants, sort_keys=True) + "\n")
    save_nets(b.hierarchy, b.order, out / "nets.json")
    system = b.machine.system(sample_omega(b.order, seed))
    save_system(system, out / "system.json")
    h = b.hierarchy
    with (out / "splines.tsv").open("w") as fh:
        fh.write("level\talpha_id\tpoint_id\tvalue\n")
        for k in range(h.k_coarse, h.k_fine + 1):
            lev = h.level(k)
            vals = b.splines.at(k)
            for a, center in enumerate(lev):
                for x in range(b.space.n):
                    fh.write(f"{k}\t{center}\t{x}\t{vals[a, x]!r}\n")
    for k in range(h.k_coarse, h.k_fine + 1):
        lev = h.level(k)
        with (out / f"gram_level_{k}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "value"])
            M = b.gramsys.at(k).M
            for i in range(lev.size):
                for j in range(lev.size):
                    if M[i, j] != 0.0:
                        writer.writerow([int(lev[i]), int(lev[j]), repr(M[i, j])])
    save_basis(b.basis, out / "basis.json")
    write_report(result.checks, out / "report.json")


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """space -> nets -> order -> cubes -> splines -> gram -> wavelets -> checks."""
    space = resolve_space(config.space)
    bundle = build_bundle(space, config.delta, config.mode)
    result = PipelineResult(config=config, bundle=bundle)
    rng = np.random.default_rng(config.seed)
    for suite in config.suites:
        if suite == "nets":
            result.checks += _suite_nets(bundle)
        elif suite == "cubes":
            result.checks += _suite_cubes(bundle, config.seed)
        elif suite == "splines":
            result.checks += _suite_splines(bundle, config.seed, config.nsamples)
        elif suite == "mra":
            result.checks += _suite_mra(bundle, rng)
        elif suite == "wavelets":
            result.checks += _suite_wavelets(bundle, rng)
        elif suite == "analysis":
            result.checks += _suite_analysis(bundle, rng)
    if config.out is not None:
        _write_artifacts(result, Path(config.out), config.seed)
    return result

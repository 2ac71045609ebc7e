"""Exhaustion pipeline: per-stage minimization, rescaling, limit assembly.

Each compact stage is solved on the simplex, rescaled so the stationarity
parameter becomes exactly 1, and extended by zero to the full space. The
certified window collects the points whose boundary layer (kernel range or
epsilon-effective range) lies inside the second-to-last stage; the run's
limit is the final scaled measure restricted to that window. Analysis
checks evaluate the full final-stage measure and assert on the window, since
the averaged kernel at a window point draws mass from the boundary layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, SolverFailure
from .lagrangian import DecayProfile, Lagrangian, tail_index
from .measure import DiscreteMeasure, averaged_kernel, restrict
from .simplex_solver import (CompactProblem, CompactSolution, SolverOptions,
                             minimize_on_compact)
from .space import Exhaustion, MetricSpace, closed_ball

# A stage counts as degenerate when its kernel block is constant to this level.
_CONST_BLOCK_TOL = 1e-12

# Rescaling refuses stages whose action value sits at or below this.
_S_FLOOR = 1e-12


@dataclass
class RunOptions:
    solver: SolverOptions = field(default_factory=SolverOptions)
    stab_tol: float = 1e-6
    window_layer: float | None = None
    profile: DecayProfile | None = None
    eps: float | None = None
    stride: int = 1
    warm_start: bool = True


@dataclass(frozen=True)
class ScaledMinimizer:
    """One solved stage, rescaled so the averaged kernel is 1 on the support."""

    stage_index: int
    stage_ids: tuple[str, ...]
    measure: DiscreteMeasure
    scale: float
    s_unscaled: float
    solution: CompactSolution
    degenerate: bool = False


@dataclass(frozen=True)
class ExhaustionRun:
    stages: tuple[ScaledMinimizer, ...]
    limit: DiscreteMeasure
    window: frozenset[str]
    diagnostics: dict


def rescale(solution: CompactSolution, space: MetricSpace, L: Lagrangian | None = None,
            stage_index: int = 0, tol: float = 1e-8,
            degenerate: bool = False) -> ScaledMinimizer:
    """Scale a stage solution by 1/s so its averaged kernel hits 1 on support.

    With the kernel supplied, the rescaled stationarity is revalidated: the
    recomputed averaged kernel minus 1 must vanish on the support and stay
    above -10*tol on the stage.
    """
    s = solution.s_param
    if not math.isfinite(s) or s <= _S_FLOOR:
        from .errors import DegenerateStageError
        raise DegenerateStageError(f"stage value {s} is too small to rescale")
    lam = 1.0 / s
    weights = {pid: lam * float(w) for pid, w in zip(solution.ids, solution.weights)
               if w > 0}
    rho = DiscreteMeasure(weights=weights, space_key=space.key)
    if L is not None:
        ell = stage_ell(rho, L)
        stage_idx = [L.at(x) for x in solution.ids]
        on_supp = [L.at(x) for x in rho.weights]
        max_on = float(np.abs(ell[on_supp]).max())
        min_stage = float(ell[stage_idx].min())
        if max_on > 10.0 * tol or min_stage < -10.0 * tol:
            raise SolverFailure(
                f"rescaled stationarity residual too large "
                f"(support {max_on:.3e}, stage floor {min_stage:.3e})",
                best_weights=solution.weights, best_value=solution.value,
                residuals=solution.kkt)
    return ScaledMinimizer(stage_index=stage_index, stage_ids=solution.ids,
                           measure=rho, scale=lam, s_unscaled=s,
                           solution=solution, degenerate=degenerate)


def stage_ell(rho: DiscreteMeasure, L: Lagrangian) -> np.ndarray:
    """Averaged kernel minus 1, over every point of the kernel domain."""
    return averaged_kernel(rho, L) - 1.0


def window_points(space: MetricSpace, stage, layer: float) -> frozenset[str]:
    """Points whose closed layer-ball lies inside the given stage."""
    stage = frozenset(stage)
    return frozenset(x for x in stage
                     if closed_ball(space, x, layer) <= stage)


def resolve_window_layer(L: Lagrangian, options: RunOptions) -> float:
    if options.window_layer is not None:
        if options.window_layer < 0:
            raise InputError("window layer must be nonnegative")
        return float(options.window_layer)
    if options.profile is not None and options.eps is not None:
        return float(tail_index(options.profile, options.eps))
    if L.declared_range is not None:
        return float(L.declared_range)
    raise InputError("window policy undetermined: give a layer, a profile with "
                     "eps, or a kernel with a declared range")


def _stage_seed(seed: int, stage_index: int) -> int:
    return int(np.random.SeedSequence([seed, stage_index]).generate_state(1)[0])


def run_exhaustion(space: MetricSpace, L: Lagrangian, exhaustion: Exhaustion,
                   options: RunOptions | None = None) -> ExhaustionRun:
    """Solve every stage, rescale, certify the window, assemble the limit."""
    options = options or RunOptions()
    if space.key != L.space_key:
        raise InputError("kernel was built on a different space")
    if options.stride < 1:
        raise InputError("stride must be a positive integer")
    layer = resolve_window_layer(L, options)
    stage_sets = list(exhaustion.stages)
    if options.stride > 1:
        picked = list(range(0, len(stage_sets), options.stride))
        if picked[-1] != len(stage_sets) - 1:
            picked.append(len(stage_sets) - 1)
        stage_sets = [stage_sets[i] for i in picked]

    scaled: list[ScaledMinimizer] = []
    prev: CompactSolution | None = None
    for n, stage in enumerate(stage_sets):
        idx = sorted(space._at(x) for x in stage)
        ids = tuple(space.ids[i] for i in idx)
        block = L.matrix[np.ix_(idx, idx)]
        spread = float(block.max() - block.min())
        degenerate = spread <= _CONST_BLOCK_TOL * max(1.0, float(block.max()))
        opts = replace(options.solver, seed=_stage_seed(options.solver.seed, n))
        extra = []
        if options.warm_start and prev is not None:
            lift = {p: w for p, w in zip(prev.ids, prev.weights)}
            extra.append(np.array([lift.get(p, 0.0) for p in ids]))
        problem = CompactProblem(ids=ids, matrix=block, options=opts)
        solution = minimize_on_compact(problem, extra_starts=extra)
        scaled.append(rescale(solution, space, L, stage_index=n,
                              tol=options.solver.tol, degenerate=degenerate))
        prev = solution

    last = scaled[-1]
    if len(scaled) == 1:
        window = frozenset(last.stage_ids)
        limit = last.measure
        stab_gap = 0.0
    else:
        window = window_points(space, scaled[-2].stage_ids, layer)
        limit = restrict(last.measure, window)
        stab_gap = max((abs(last.measure.weight(x) - scaled[-2].measure.weight(x))
                        for x in window), default=0.0)

    discrepancies = {}
    for m in range(len(scaled) - 1):
        interior = window_points(space, scaled[m].stage_ids, layer)
        for n in range(m + 1, len(scaled)):
            gap = max((abs(scaled[n].measure.weight(x) - last.measure.weight(x))
                       for x in interior), default=0.0)
            discrepancies[f"{m},{n}"] = gap

    diagnostics = {
        "window_layer": layer,
        "stabilized": stab_gap <= options.stab_tol,
        "stab_gap": stab_gap,
        "stab_tol": options.stab_tol,
        "lambda_series": [s.scale for s in scaled],
        "s_series": [s.s_unscaled for s in scaled],
        "degenerate_stages": [s.stage_index for s in scaled if s.degenerate],
        "discrepancies": discrepancies,
        "window_empty": len(window) == 0,
    }
    return ExhaustionRun(stages=tuple(scaled), limit=limit, window=window,
                         diagnostics=diagnostics)


def local_mass_bound_check(stage: ScaledMinimizer, space: MetricSpace, L: Lagrangian,
                           probes, radius: float, tol: float = 1e-8) -> dict:
    """Scaled stage mass of validated balls against the 2/L(x,x) bound.

    A ball is validated when L(y, z) >= L(x, x)/2 for every pair inside it;
    the radius shrinks through realized distances until that holds.
    """
    if space.key != L.space_key:
        raise InputError("kernel was built on a different space")
    entries = []
    passed = True
    for x in probes:
        xi = space._at(x)
        diag = float(L.matrix[xi, xi])
        bound = 2.0 / diag
        row = space.dist[xi]
        candidates = sorted({float(r) for r in row if r <= radius + 1e-12},
                            reverse=True)
        used = None
        members: list[int] = []
        for r in candidates:
            ball = np.nonzero(row <= r + 1e-12)[0]
            sub = L.matrix[np.ix_(ball, ball)]
            if float(sub.min()) >= diag / 2.0:
                used, members = r, list(ball)
                break
        if used is None:
            entries.append({"probe": x, "requested_radius": radius, "skipped": True})
            continue
        mass = stage.measure.mass(space.ids[i] for i in members)
        ok = mass <= bound + tol
        passed = passed and ok
        entries.append({"probe": x, "requested_radius": radius, "radius": used,
                        "shrunk": used < radius - 1e-12, "ball_size": len(members),
                        "mass": mass, "bound": bound, "ok": ok, "skipped": False})
    return {"passed": passed, "entries": entries}


def check_support_approximation(run: ExhaustionRun, space: MetricSpace) -> dict:
    """Distance from limit-support points to each stage's support must shrink to 0."""
    targets = sorted(run.limit.support & run.window, key=space._at)
    entries = []
    passed = True
    for x in targets:
        xi = space._at(x)
        seq = []
        for s in run.stages:
            supp_idx = [space._at(y) for y in s.measure.support]
            seq.append(float(space.dist[xi, supp_idx].min()) if supp_idx else math.inf)
        nonincreasing = all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))
        ok = nonincreasing and seq[-1] <= 1e-12
        passed = passed and ok
        entries.append({"point": x, "distances": seq, "ok": ok})
    return {"passed": passed, "entries": entries,
            "vacuous": len(targets) == 0}


def check_ell_convergence(run: ExhaustionRun, L: Lagrangian, sample_points,
                          space: MetricSpace, tol: float = 1e-9) -> dict:
    """Pointwise gaps to the final averaged kernel, plus a discrete modulus.

    The gap sequence must be non-increasing over the last three stages; the
    modulus (max variation across nearest-neighbor pairs of the sample) is
    reported per stage as an equicontinuity surrogate.
    """
    sample = sorted(set(sample_points), key=space._at)
    if not sample:
        raise InputError("need at least one sample point")
    idx = [space._at(x) for x in sample]
    ells = [stage_ell(s.measure, L)[idx] for s in run.stages]
    ell_lim = ells[-1]
    entries = []
    passed = True
    for pos, x in enumerate(sample):
        gaps = [abs(float(e[pos] - ell_lim[pos])) for e in ells]
        window = gaps[-min(3, len(gaps)):]
        ok = all(b <= a + tol for a, b in zip(window, window[1:]))
        passed = passed and ok
        entries.append({"point": x, "gaps": gaps, "ok": ok})
    pos_d = space.dist[np.ix_(idx, idx)]
    off = pos_d[pos_d > 0]
    h = float(off.min()) if off.size else 0.0
    moduli = []
    for e in ells:
        pairs = (pos_d > 0) & (pos_d <= h + 1e-12)
        moduli.append(float(np.abs(e[:, None] - e[None, :])[pairs].max())
                      if pairs.any() else 0.0)
    return {"passed": passed, "entries": entries, "neighbor_scale": h,
            "modulus_per_stage": moduli, "modulus_sup": max(moduli)}


def tail_mass(rho: DiscreteMeasure, L: Lagrangian, space: MetricSpace, x: str,
              R: float) -> float:
    """Kernel mass rho picks up beyond distance R from x."""
    if space.key != L.space_key or rho.space_key != space.key:
        raise InputError("measure, kernel and space must match")
    xi = space._at(x)
    return math.fsum(w * float(L.matrix[xi, space._at(y)])
                     for y, w in rho.weights.items()
                     if float(space.dist[xi, space._at(y)]) > R)

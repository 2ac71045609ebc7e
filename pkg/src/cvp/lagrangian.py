"""Interaction kernels and decay-in-entropy certificates.

A kernel is a symmetric nonnegative matrix over a point cloud with strictly
positive diagonal. Decay profiles majorize the kernel at large distance and
drive the tail index used for epsilon-effective ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, InputError, ProfileError
from .space import MetricSpace, closed_ball, covering_number

_KINDS = ("tent", "truncated_gaussian", "exponential", "matrix")

# Witness cap for decay-certificate reports.
_MAX_WITNESSES = 10


@dataclass(frozen=True)
class Lagrangian:
    """Precomputed kernel matrix bound to a specific space."""

    kind: str
    params: dict
    ids: tuple[str, ...]
    matrix: np.ndarray
    space_key: str
    declared_range: float | None = None
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = len(self.ids)
        if m.shape != (n, n):
            raise ConstructionError(f"kernel matrix must be {n}x{n}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ConstructionError("kernel values must be finite")
        if np.any(m < 0):
            raise ConstructionError("kernel values must be nonnegative")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12):
            raise ConstructionError("kernel must be symmetric")
        if np.any(np.diag(m) <= 0):
            raise ConstructionError("kernel diagonal must be strictly positive")
        m = (m + m.T) / 2.0
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "index", {p: i for i, p in enumerate(self.ids)})

    def at(self, x: str) -> int:
        try:
            return self.index[x]
        except KeyError:
            raise InputError(f"point id {x!r} not in kernel domain") from None

    def eval(self, x: str, y: str) -> float:
        return float(self.matrix[self.at(x), self.at(y)])


def make_kernel(kind: str, params: dict, space: MetricSpace) -> Lagrangian:
    """Build a kernel of the given kind on ``space``.

    Kinds: ``tent`` (amplitude, range), ``truncated_gaussian`` (amplitude,
    sigma, range), ``exponential`` (amplitude, sigma), ``matrix`` (matrix,
    optional range).
    """
    if kind not in _KINDS:
        raise InputError(f"unknown kernel kind {kind!r}, expected one of {_KINDS}")
    d = space.dist
    declared: float | None = None
    if kind == "tent":
        a = float(params.get("amplitude", 1.0))
        r0 = float(params["range"])
        if a <= 0 or r0 <= 0:
            raise ConstructionError("tent kernel needs positive amplitude and range")
        m = a * np.maximum(0.0, 1.0 - d / r0)
        declared = r0
    elif kind == "truncated_gaussian":
        a = float(params.get("amplitude", 1.0))
        sigma = float(params["sigma"])
        r0 = float(params["range"])
        if a <= 0 or sigma <= 0 or r0 <= 0:
            raise ConstructionError(
                "truncated gaussian needs positive amplitude, sigma and range")
        m = a * np.exp(-(d / sigma) ** 2) * (d <= r0)
        declared = r0
    elif kind == "exponential":
        a = float(params.get("amplitude", 1.0))
        sigma = float(params.get("sigma", 1.0))
        if a <= 0 or sigma <= 0:
            raise ConstructionError("exponential kernel needs positive amplitude and sigma")
        m = a * np.exp(-d / sigma)
        declared = None
    else:
        m = np.asarray(params["matrix"], dtype=float)
        declared = params.get("range")
        declared = None if declared is None else float(declared)
    return Lagrangian(kind=kind, params=dict(params), ids=space.ids, matrix=m,
                      space_key=space.key, declared_range=declared)


def kernel_from_spec(spec: dict, space: MetricSpace) -> Lagrangian:
    spec = dict(spec)
    try:
        kind = spec.pop("kind")
    except KeyError:
        raise InputError("kernel spec needs a 'kind' field") from None
    return make_kernel(kind, spec, space)


def kernel_to_dict(L: Lagrangian) -> dict:
    out = {"kind": L.kind}
    for k, v in L.params.items():
        if k == "matrix":
            out["matrix"] = [[float(x) for x in row] for row in v]
        else:
            out[k] = v
    return out


def diagonal_infimum(L: Lagrangian, space: MetricSpace | None = None) -> float:
    """inf over x of L(x, x); strictly positive by construction."""
    _check_space(L, space)
    return float(np.diag(L.matrix).min())


def global_sup(L: Lagrangian) -> float:
    """sup over pairs of L(x, y) (finite spaces are always bounded)."""
    return float(L.matrix.max())


def effective_range(L: Lagrangian, space: MetricSpace, K) -> frozenset[str]:
    """Smallest K' with L(x, y) = 0 for every x in K and y outside K'."""
    _check_space(L, space)
    rows = [L.at(x) for x in K]
    if not rows:
        raise InputError("effective_range needs a nonempty point set")
    mask = (L.matrix[rows] > 0.0).any(axis=0)
    return frozenset(L.ids[i] for i in np.nonzero(mask)[0])


def verify_compact_range(L: Lagrangian, space: MetricSpace, exhaustion) -> dict:
    """Check that every stage's effective range stays in a bounded thickening.

    With a declared finite range r0, the range of stage K must land inside the
    r0-thickening of K. Without one (exponential, bare matrices) the check
    demands the range add nothing beyond K itself.
    """
    _check_space(L, space)
    per_stage = []
    holds = True
    for i, stage in enumerate(exhaustion.stages):
        kprime = effective_range(L, space, stage)
        if L.declared_range is not None:
            allowed = set()
            for x in stage:
                allowed |= closed_ball(space, x, L.declared_range)
            contained = kprime <= allowed
        else:
            contained = kprime <= frozenset(stage)
        holds = holds and contained
        per_stage.append({"stage": i, "size": len(stage),
                          "range_size": len(kprime), "contained": contained})
    return {"holds": holds, "declared_range": L.declared_range, "stages": per_stage}


@dataclass(frozen=True)
class DecayProfile:
    """Decreasing integrable majorant f with entropy radius delta.

    ``c`` is the kernel's diagonal infimum and fixes ``coeff = 1 + 2/c``.
    ``tail(t)`` returns an upper bound on the integral of f over [t, inf).
    """

    kind: str
    params: dict
    delta: float
    c: float
    f: Callable[[float], float]
    tail: Callable[[float], float]
    cutoff: float | None = None
    coeff: float = field(init=False)

    def __post_init__(self):
        if self.delta <= 0:
            raise ProfileError("profile delta must be positive")
        if self.c <= 0:
            raise ProfileError("profile needs the kernel diagonal infimum c > 0")
        object.__setattr__(self, "coeff", 1.0 + 2.0 / self.c)
        _check_decreasing(self.f, self.cutoff)


def _check_decreasing(f, cutoff) -> None:
    hi = 50.0 if cutoff is None else max(cutoff, 1.0)
    xs = np.linspace(0.0, hi, 201)
    vals = np.array([f(float(x)) for x in xs])
    if np.any(vals < -1e-15):
        raise ProfileError("profile f must be nonnegative")
    if np.any(np.diff(vals) > 1e-12 * max(1.0, float(vals.max(initial=0.0)))):
        raise ProfileError("profile f must be monotonically decreasing")


def exp_profile(amplitude: float, rate: float, delta: float, c: float) -> DecayProfile:
    if amplitude < 0 or rate <= 0:
        raise ProfileError("exponential profile needs amplitude >= 0 and rate > 0")

    def f(d: float) -> float:
        return amplitude * math.exp(-rate * d)

    def tail(t: float) -> float:
        return amplitude / rate * math.exp(-rate * max(t, 0.0))

    return DecayProfile(kind="exp", params={"amplitude": amplitude, "rate": rate},
                        delta=delta, c=c, f=f, tail=tail)


def poly_profile(amplitude: float, power: float, delta: float, c: float) -> DecayProfile:
    if power <= 1.0:
        raise ProfileError(f"polynomial profile with power {power} is not integrable")
    if amplitude < 0:
        raise ProfileError("polynomial profile needs amplitude >= 0")

    def f(d: float) -> float:
        return amplitude * (1.0 + d) ** (-power)

    def tail(t: float) -> float:
        return amplitude / (power - 1.0) * (1.0 + max(t, 0.0)) ** (1.0 - power)

    return DecayProfile(kind="poly", params={"amplitude": amplitude, "power": power},
                        delta=delta, c=c, f=f, tail=tail)


def scaled_exp_profile(amplitude: float, slope: float, rate: float, delta: float,
                       c: float) -> DecayProfile:
    """f(d) = amplitude * (d + slope) * exp(-rate * d), decreasing for slope*rate >= 1."""
    if amplitude < 0 or rate <= 0 or slope * rate < 1.0:
        raise ProfileError("scaled exponential profile must be decreasing")

    def f(d: float) -> float:
        return amplitude * (d + slope) * math.exp(-rate * d)

    def tail(t: float) -> float:
        t = max(t, 0.0)
        # int_t^inf (d+slope) e^{-r d} dd = e^{-r t} (t + slope + 1/r) / r
        return amplitude * math.exp(-rate * t) * (t + slope + 1.0 / rate) / rate

    return DecayProfile(kind="scaled_exp",
                        params={"amplitude": amplitude, "slope": slope, "rate": rate},
                        delta=delta, c=c, f=f, tail=tail)


def truncated_profile(f: Callable[[float], float], cutoff: float, delta: float,
                      c: float, steps: int = 4096) -> DecayProfile:
    """Profile vanishing beyond ``cutoff``; tails use one-sided upper sums."""
    if cutoff <= 0:
        raise ProfileError("truncated profile needs a positive cutoff")

    def g(d: float) -> float:
        return f(d) if d < cutoff else 0.0

    def tail(t: float) -> float:
        t = max(t, 0.0)
        if t >= cutoff:
            return 0.0
        # Upper Riemann sum: f decreasing, left endpoints dominate.
        xs = np.linspace(t, cutoff, steps + 1)[:-1]
        h = (cutoff - t) / steps
        return float(sum(g(float(x)) for x in xs) * h)

    return DecayProfile(kind="truncated", params={"cutoff": cutoff}, delta=delta,
                        c=c, f=g, tail=tail, cutoff=cutoff)


def profile_from_spec(spec: dict, c: float) -> DecayProfile:
    try:
        kind = spec["f"]
        delta = float(spec["delta"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"profile spec missing field: {exc}") from None
    params = spec.get("params", {})
    if kind == "exp":
        return exp_profile(float(params.get("amplitude", 1.0)),
                           float(params.get("rate", 1.0)), delta, c)
    if kind == "poly":
        return poly_profile(float(params.get("amplitude", 1.0)),
                            float(params.get("power", 2.0)), delta, c)
    if kind == "scaled_exp":
        return scaled_exp_profile(float(params.get("amplitude", 1.0)),
                                  float(params.get("slope", 2.0)),
                                  float(params.get("rate", 1.0)), delta, c)
    raise InputError(f"unknown profile kind {kind!r}")


def profile_to_dict(profile: DecayProfile) -> dict:
    return {"f": profile.kind, "params": dict(profile.params), "delta": profile.delta}


def tail_index(profile: DecayProfile, eps: float, cap: int = 10 ** 6) -> int:
    """Smallest integer N0 > 1 whose tail integral from N0 - 1 is below eps/3."""
    if eps <= 0:
        raise InputError("tail index needs eps > 0")
    for n in range(2, cap + 1):
        if profile.tail(float(n - 1)) < eps / 3.0:
            return n
    raise ProfileError(f"tail never drops below {eps}/3 up to N0 = {cap}")


def _radius_bounds(L: Lagrangian, space: MetricSpace, exclude=frozenset()):
    """Per-point largest passing closed radius and exact discrete sup.

    For each x the admissible radii are those whose closed ball keeps
    L(x, .) >= c/2 everywhere; the sup over real radii equals the smallest
    realized distance carrying a failing point (open balls stop just short
    of it).
    """
    _check_space(L, space)
    c = diagonal_infimum(L)
    excl = frozenset(exclude)
    closed_inf = math.inf
    sup_inf = math.inf
    for i, pid in enumerate(space.ids):
        if pid in excl:
            continue
        row_d = space.dist[i]
        failing = L.matrix[i] < c / 2.0
        if failing.any():
            d_fail = float(row_d[failing].min())
            below = row_d[row_d < d_fail - 1e-15]
            d_ok = float(below.max()) if below.size else 0.0
        else:
            d_fail = math.inf
            d_ok = float(row_d.max())
        closed_inf = min(closed_inf, d_ok)
        sup_inf = min(sup_inf, d_fail)
    if math.isinf(closed_inf):
        raise InputError("entropy radius undefined: every point excluded")
    return closed_inf, sup_inf


def entropy_ball_radius(L: Lagrangian, space: MetricSpace, exclude=frozenset()) -> float:
    """Conservative entropy radius: largest realized distance whose closed
    ball satisfies L(x, .) >= c/2 at every point outside ``exclude``."""
    closed_inf, _ = _radius_bounds(L, space, exclude)
    return closed_inf


def verify_entropy_decay(L: Lagrangian, space: MetricSpace, profile: DecayProfile,
                         core=frozenset()) -> dict:
    """Certificate for decay in entropy.

    (a) positive diagonal infimum, (b) entropy radius at least the profile's
    delta outside the declared core (checked against the exact discrete sup;
    the conservative closed-ball witness is reported alongside), (c) the
    kernel is majorized by f(d) / (coeff * E_x(d + 2, delta)) on all ordered
    pairs. At most 10 violating witnesses are reported.
    """
    _check_space(L, space)
    c = diagonal_infimum(L)
    cond_a = c > 0.0
    delta_closed, delta_sup = _radius_bounds(L, space, core)
    cond_b = delta_sup >= profile.delta - 1e-12
    witnesses = []
    checked = 0
    n = len(space.ids)
    for i in range(n):
        xi = space.ids[i]
        for j in range(n):
            if i == j:
                continue
            val = float(L.matrix[i, j])
            d = float(space.dist[i, j])
            checked += 1
            cover = covering_number(space, xi, d + 2.0, profile.delta)
            bound = profile.f(d) / (profile.coeff * cover)
            if val > bound + 1e-12 * max(1.0, bound):
                if len(witnesses) < _MAX_WITNESSES:
                    witnesses.append({"x": xi, "y": space.ids[j], "value": val,
                                      "bound": bound, "distance": d})
    cond_c = not witnesses
    return {
        "holds": bool(cond_a and cond_b and cond_c),
        "condition_a": {"holds": bool(cond_a), "c": c},
        "condition_b": {"holds": bool(cond_b), "delta_closed": delta_closed,
                        "delta_sup": delta_sup, "delta_required": profile.delta},
        "condition_c": {"holds": bool(cond_c), "checked_pairs": checked},
        "witnesses": witnesses,
    }


def _check_space(L: Lagrangian, space: MetricSpace | None) -> None:
    if space is not None and space.key != L.space_key:
        raise InputError("kernel was built on a different space")

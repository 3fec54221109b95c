"""Information-propagation kernels.

A kernel maps a space-time offset (x, t) from the origin of a piece of
traffic information to the weight p in [0, 1] with which that information
updates a traveler's perceived cost.  Six strategies are provided:

* ``Zero``             -- no propagation at all (static assignment).
* ``GlobalGap``        -- weight 1 everywhere for a fixed time window.
* ``NaturalGlobal``    -- exponential decay in time, uniform in space.
* ``LocalGap``         -- time window restricted to a spatial radius.
* ``NaturalLocal``     -- exponential time decay inside a spatial radius.
* ``NaturalSpaceTime`` -- exponential decay in both space and time.

All kernels accept an optional propagation velocity ``v``; when set, the
weight is forced to 0 before the information can physically arrive
(t < x / v).  On top of pointwise evaluation the module provides the
total-influence integral, an L2 phase distance between kernels, the
pointwise phase-lead ordering, and the two admissibility checks used to
classify strategies (finite amplified influence; inclination towards a
reference decay).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ValidationError

_E = math.e


def _check_positive(obj, name):
    if getattr(obj, name) <= 0:
        raise ValidationError(f"{type(obj).__name__}: {name} must be > 0")


def _check_base(obj, name):
    if getattr(obj, name) <= 1:
        raise ValidationError(f"{type(obj).__name__}: {name} must be > 1")


def _check_velocity(obj):
    if obj.v is not None and obj.v <= 0:
        raise ValidationError(f"{type(obj).__name__}: v must be > 0 or absent")


@dataclass(frozen=True)
class Zero:
    """Weight 0 everywhere: information never updates perceived costs."""

    v: float | None = None
    family = "zero"

    def __post_init__(self):
        _check_velocity(self)


@dataclass(frozen=True)
class GlobalGap:
    """Weight 1 at every distance while the information is younger than dt."""

    dt: float
    v: float | None = None
    family = "global-gap"

    def __post_init__(self):
        _check_positive(self, "dt")
        _check_velocity(self)


@dataclass(frozen=True)
class NaturalGlobal:
    """Spatially uniform, decaying in time as mt**(-t/ct).

    ct is the expected lifetime of a piece of information in steps.
    """

    ct: float
    mt: float = _E
    v: float | None = None
    family = "natural-global"

    def __post_init__(self):
        _check_positive(self, "ct")
        _check_base(self, "mt")
        _check_velocity(self)


@dataclass(frozen=True)
class LocalGap:
    """Weight 1 inside a spatial radius while younger than dt, else 0."""

    x_radius: float
    dt: float
    v: float | None = None
    family = "local-gap"

    def __post_init__(self):
        _check_positive(self, "x_radius")
        _check_positive(self, "dt")
        _check_velocity(self)


@dataclass(frozen=True)
class NaturalLocal:
    """Exponential time decay inside a spatial radius, 0 outside."""

    x_radius: float
    ct: float
    mt: float = _E
    v: float | None = None
    family = "natural-local"

    def __post_init__(self):
        _check_positive(self, "x_radius")
        _check_positive(self, "ct")
        _check_base(self, "mt")
        _check_velocity(self)


@dataclass(frozen=True)
class NaturalSpaceTime:
    """Exponential decay in both coordinates: mx**(-x/cx) * mt**(-t/ct).

    cx is the expected propagation radius, ct the expected lifetime.
    """

    cx: float
    ct: float
    mx: float = _E
    mt: float = _E
    v: float | None = None
    family = "natural-spacetime"

    def __post_init__(self):
        _check_positive(self, "cx")
        _check_positive(self, "ct")
        _check_base(self, "mx")
        _check_base(self, "mt")
        _check_velocity(self)


KernelSpec = Zero | GlobalGap | NaturalGlobal | LocalGap | NaturalLocal | NaturalSpaceTime

#: Families whose spatial factor is constant 1; their influence integral
#: diverges over an unbounded network regardless of any arrival gating.
SPATIALLY_UNIFORM = (GlobalGap, NaturalGlobal)

FAMILIES: dict[str, type] = {
    cls.family: cls
    for cls in (Zero, GlobalGap, NaturalGlobal, LocalGap, NaturalLocal, NaturalSpaceTime)
}

#: Parameters that rescale the integral monotonically, per family.
SCALE_PARAMS: dict[str, tuple[str, ...]] = {
    "zero": (),
    "global-gap": ("dt",),
    "natural-global": ("ct",),
    "local-gap": ("x_radius", "dt"),
    "natural-local": ("x_radius", "ct"),
    "natural-spacetime": ("cx", "ct"),
}


def build_kernel(family: str, params: dict[str, float]) -> KernelSpec:
    """Construct a kernel from a family name and a parameter mapping."""
    cls = FAMILIES.get(family)
    if cls is None:
        raise ValidationError(
            f"unknown kernel family {family!r}; expected one of {sorted(FAMILIES)}"
        )
    known = {f.name for f in fields(cls)}
    unknown = set(params) - known
    if unknown:
        raise ValidationError(
            f"kernel {family!r} does not take parameter(s) {sorted(unknown)}"
        )
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError(f"kernel {family!r}: {exc}") from exc


def evaluate(k: KernelSpec, x: float, t: float) -> float:
    """Influence weight of a piece of information at distance x and age t."""
    if x < 0 or t < 0:
        raise ValidationError("x and t must be >= 0")
    if k.v is not None and t < x / k.v:
        return 0.0
    if isinstance(k, Zero):
        return 0.0
    if isinstance(k, GlobalGap):
        p = 1.0 if t < k.dt else 0.0
    elif isinstance(k, NaturalGlobal):
        p = k.mt ** (-t / k.ct)
    elif isinstance(k, LocalGap):
        p = 1.0 if (x <= k.x_radius and t < k.dt) else 0.0
    elif isinstance(k, NaturalLocal):
        p = k.mt ** (-t / k.ct) if x <= k.x_radius else 0.0
    elif isinstance(k, NaturalSpaceTime):
        p = k.mx ** (-x / k.cx) * k.mt ** (-t / k.ct)
    else:
        raise TypeError(f"not a kernel spec: {k!r}")
    return min(1.0, max(0.0, p))


def _grid_values(k: KernelSpec, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Vectorized evaluate() on the outer grid xs x ts; same semantics."""
    x = xs[:, None]
    t = ts[None, :]
    if isinstance(k, Zero):
        p = np.zeros((xs.size, ts.size))
    elif isinstance(k, GlobalGap):
        p = np.broadcast_to((t < k.dt).astype(float), (xs.size, ts.size)).copy()
    elif isinstance(k, NaturalGlobal):
        p = np.broadcast_to(k.mt ** (-t / k.ct), (xs.size, ts.size)).copy()
    elif isinstance(k, LocalGap):
        p = ((x <= k.x_radius) & (t < k.dt)).astype(float)
    elif isinstance(k, NaturalLocal):
        p = (x <= k.x_radius) * (k.mt ** (-t / k.ct))
    elif isinstance(k, NaturalSpaceTime):
        p = (k.mx ** (-x / k.cx)) * (k.mt ** (-t / k.ct))
    else:
        raise TypeError(f"not a kernel spec: {k!r}")
    if k.v is not None:
        p = np.where(t < x / k.v, 0.0, p)
    return np.clip(p, 0.0, 1.0)


@dataclass(frozen=True)
class Domain2D:
    """Rectangular space-time integration region [0,x_max] x [0,t_max].

    dx and dt_grid are requested grid spacings; the actual spacing is the
    nearest value that divides the axis into a whole number of cells.
    """

    x_max: float
    t_max: float
    dx: float
    dt_grid: float

    def __post_init__(self):
        for name in ("x_max", "t_max", "dx", "dt_grid"):
            _check_positive(self, name)
        if self.x_max < self.dx:
            raise ValidationError("Domain2D: x_max must be >= dx")
        if self.t_max < self.dt_grid:
            raise ValidationError("Domain2D: t_max must be >= dt_grid")

    def axes(self) -> tuple[np.ndarray, float, np.ndarray, float]:
        """Midpoint sample coordinates and actual cell sizes (xs, hx, ts, ht)."""
        nx = max(1, round(self.x_max / self.dx))
        nt = max(1, round(self.t_max / self.dt_grid))
        hx = self.x_max / nx
        ht = self.t_max / nt
        xs = (np.arange(nx) + 0.5) * hx
        ts = (np.arange(nt) + 0.5) * ht
        return xs, hx, ts, ht


def total_influence(k: KernelSpec, dom: Domain2D) -> float:
    """Midpoint-rule integral of the kernel over the domain.

    This is the cumulative effect a single piece of information exerts on
    the network while it propagates and decays.
    """
    xs, hx, ts, ht = dom.axes()
    return float(_grid_values(k, xs, ts).sum() * hx * ht)


def phase_distance(k1: KernelSpec, k2: KernelSpec, dom: Domain2D) -> float:
    """Discretized L2 distance between two kernels on the domain grid."""
    xs, hx, ts, ht = dom.axes()
    diff = _grid_values(k1, xs, ts) - _grid_values(k2, xs, ts)
    return float(math.sqrt((diff * diff).sum() * hx * ht))


class PhaseOrder(enum.Enum):
    LEAD = "Lead"
    LAG = "Lag"
    EQUAL = "Equal"


def phase_lead(k1: KernelSpec, k2: KernelSpec, x: float, t: float) -> PhaseOrder:
    """Pointwise ordering of two kernels' weights at (x, t)."""
    p1 = evaluate(k1, x, t)
    p2 = evaluate(k2, x, t)
    if p1 > p2:
        return PhaseOrder.LEAD
    if p1 < p2:
        return PhaseOrder.LAG
    return PhaseOrder.EQUAL


class Principle1(enum.Enum):
    PASS = "Pass"
    DIVERGES_IN_SPACE = "DivergesInSpace"
    DIVERGES_IN_TIME = "DivergesInTime"
    BELOW_REFERENCE = "BelowReference"


@dataclass(frozen=True)
class PrincipleReport:
    """Admissibility summary of a kernel against a reference decay.

    principle1_integral is +inf exactly when the kernel's influence
    diverges; principle2_distance is the L2 distance to the reference and
    is reported as a magnitude, not a pass/fail verdict.
    """

    principle1: Principle1
    principle1_integral: float
    principle2_distance: float

    def __post_init__(self):
        diverged = self.principle1 in (
            Principle1.DIVERGES_IN_SPACE,
            Principle1.DIVERGES_IN_TIME,
        )
        if diverged != math.isinf(self.principle1_integral):
            raise ValidationError(
                "principle1_integral must be infinite iff principle1 diverges"
            )


def check_principles(
    k: KernelSpec, reference_f: KernelSpec, dom: Domain2D
) -> PrincipleReport:
    """Classify a kernel against the two admissibility principles.

    The finiteness verdict is analytic per family: spatially uniform
    kernels amplify influence over an unbounded network without limit, so
    they diverge in space no matter the numbers on a bounded grid
    (arrival gating via v does not change the family classification).
    Bounded kernels pass only when their integral strictly exceeds the
    reference's on the same grid.
    """
    if isinstance(reference_f, SPATIALLY_UNIFORM):
        raise ValidationError(
            "reference kernel must have finite total influence; "
            f"{reference_f.family!r} diverges in space"
        )
    distance = phase_distance(k, reference_f, dom)
    if isinstance(k, SPATIALLY_UNIFORM):
        return PrincipleReport(Principle1.DIVERGES_IN_SPACE, math.inf, distance)
    integral = total_influence(k, dom)
    reference_integral = total_influence(reference_f, dom)
    status = (
        Principle1.PASS if integral > reference_integral else Principle1.BELOW_REFERENCE
    )
    return PrincipleReport(status, integral, distance)

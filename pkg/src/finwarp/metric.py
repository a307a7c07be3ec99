"""Metric specifications, coordinate bookkeeping, and Finsler-validity checks.

A metric is F(x, y) = |ybar| * phi(x0, r, s, z) with r = |xbar|,
s = <xbar, ybar>/|ybar|, z = y0/|ybar|.  This module owns the sample-point
geometry, the table of phi-partials that feeds every closed-form formula,
the validity functions

    Omega  = phi - s*phi_s - z*phi_z
    Lambda = Omega*phi_zz + (r^2 - s^2) * (phi_ss*phi_zz - phi_sz^2)

and the positive-definiteness oracle (fundamental tensor eigenvalues).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from . import dsl, jets
from .errors import DomainError, EmptyGrid, NonPositivePhi

PHI_VARIABLES = ("x0", "r", "s", "z")

#: Truncation order of the master phi-jet.  Curvature formulas take three
#: (s, z)-derivatives of quantities already containing second phi-partials
#: mixed with one x0- or r-derivative, so order 6 covers the worst case.
DEFAULT_TABLE_ORDER = 6

#: Relative eigenvalue floor below which the fundamental tensor does not
#: count as positive definite.
EIGENVALUE_FLOOR = 1e-9


@dataclass(frozen=True)
class SamplePoint:
    """A tangent-bundle point (x0, xbar; y0, ybar) with |ybar| > 0."""

    x0: float
    xbar: tuple[float, ...]
    ybar: tuple[float, ...]
    y0: float

    def __post_init__(self):
        if len(self.xbar) != len(self.ybar):
            raise ValueError("xbar and ybar must have the same dimension")
        if self.u == 0.0:
            raise ValueError("|ybar| must be positive")

    @property
    def n(self) -> int:
        return len(self.xbar)

    @property
    def u(self) -> float:
        return math.sqrt(sum(v * v for v in self.ybar))

    @property
    def r(self) -> float:
        return math.sqrt(sum(v * v for v in self.xbar))

    @property
    def s(self) -> float:
        return sum(a * b for a, b in zip(self.xbar, self.ybar)) / self.u

    @property
    def z(self) -> float:
        return self.y0 / self.u

    def scaled(self, lam: float) -> "SamplePoint":
        """Same base point, y scaled by lam > 0."""
        return SamplePoint(self.x0, self.xbar, tuple(lam * v for v in self.ybar), lam * self.y0)

    def rotated(self, o: np.ndarray) -> "SamplePoint":
        xb = tuple(float(v) for v in o @ np.asarray(self.xbar))
        yb = tuple(float(v) for v in o @ np.asarray(self.ybar))
        return SamplePoint(self.x0, xb, yb, self.y0)


def canonical_point(x0: float, r: float, s: float, z: float, n: int = 3, u: float = 1.0) -> SamplePoint:
    """The rotation-normalized representative of (x0, r, s, z):
    xbar = (r, 0, ..., 0), ybar = u*(s/r, sqrt(r^2-s^2)/r, 0, ..., 0), y0 = z*u.
    """
    if n < 2:
        raise ValueError("need n >= 2 to realize a generic (r, s) pair")
    if r <= 0.0:
        raise DomainError("canonical point requires r > 0")
    if abs(s) > r:
        raise DomainError("Cauchy-Schwarz requires |s| <= r")
    xbar = (r,) + (0.0,) * (n - 1)
    ybar = (u * s / r, u * math.sqrt(r * r - s * s) / r) + (0.0,) * (n - 2)
    return SamplePoint(x0, xbar, ybar, z * u)


@dataclass(frozen=True)
class Domain:
    """Box constraints on (x0, r, s, z); the s-axis is a fraction of r,
    which keeps |s| < r automatically."""

    x0: tuple[float, float] = (-1.0, 1.0)
    r: tuple[float, float] = (0.2, 1.0)
    s_frac: tuple[float, float] = (-0.9, 0.9)
    z: tuple[float, float] = (0.1, 2.0)

    def contains(self, x0: float, r: float, s: float, z: float) -> bool:
        if not (self.x0[0] <= x0 <= self.x0[1] and self.r[0] <= r <= self.r[1]):
            return False
        if r <= 0.0:
            return False
        frac = s / r
        return self.s_frac[0] <= frac <= self.s_frac[1] and self.z[0] <= z <= self.z[1]


@dataclass(frozen=True)
class GridSpec:
    """Regular product grid over a Domain; iteration order is fixed
    (x0 outermost, then r, s, z), so reductions are deterministic."""

    domain: Domain = field(default_factory=Domain)
    counts: tuple[int, int, int, int] = (5, 5, 5, 5)

    def axis(self, lo: float, hi: float, count: int) -> list[float]:
        if count < 1:
            return []
        if count == 1:
            return [0.5 * (lo + hi)]
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]

    def points(self) -> Iterator[tuple[float, float, float, float]]:
        d = self.domain
        for x0 in self.axis(*d.x0, self.counts[0]):
            for r in self.axis(*d.r, self.counts[1]):
                for frac in self.axis(*d.s_frac, self.counts[2]):
                    for z in self.axis(*d.z, self.counts[3]):
                        yield (x0, r, frac * r, z)

    def point_list(self) -> list[tuple[float, float, float, float]]:
        pts = list(self.points())
        if not pts:
            raise EmptyGrid("grid specification yields no points")
        return pts

    def xr_pairs(self) -> list[tuple[float, float]]:
        d = self.domain
        return [(x0, r)
                for x0 in self.axis(*d.x0, self.counts[0])
                for r in self.axis(*d.r, self.counts[1])]

    def sz_pairs(self, r: float) -> list[tuple[float, float]]:
        d = self.domain
        return [(frac * r, z)
                for frac in self.axis(*d.s_frac, self.counts[2])
                for z in self.axis(*d.z, self.counts[3])]


def default_grid() -> GridSpec:
    return GridSpec()


@dataclass(frozen=True)
class MetricSpec:
    """A named metric: dimension n, the phi expression, its parameters, a domain."""

    name: str
    n: int
    phi: dsl.Expression
    params: Mapping[str, float] = field(default_factory=dict)
    domain: Domain = field(default_factory=Domain)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("metric dimension n must be >= 2")

    @property
    def s_independent(self) -> bool:
        return "s" not in dsl.free_variables(self.phi)


def metric_from_phi(name: str, phi: str | dsl.Expression, n: int = 3,
                    params: Mapping[str, float] | None = None,
                    domain: Domain | None = None) -> MetricSpec:
    params = dict(params or {})
    expr = dsl.parse(phi, params) if isinstance(phi, str) else phi
    return MetricSpec(name, n, expr, params, domain or Domain())


def builtin_metric(family: str, n: int = 3, domain: Domain | None = None, **params) -> MetricSpec:
    expr = dsl.builtin(family, **params)
    return MetricSpec(family, n, expr, {}, domain or Domain())


class PhiTable:
    """All partial derivatives of phi at one (x0, r, s, z) point up to `order`.

    Wraps the master jet; `partial(a0, ar, as_, az)` returns the plain
    derivative value (factorials restored).
    """

    def __init__(self, point: tuple[float, float, float, float], jet: jets.Jet):
        self.point = point
        self.jet = jet
        self.order = jet.space.order

    @property
    def x0(self) -> float:
        return self.point[0]

    @property
    def r(self) -> float:
        return self.point[1]

    @property
    def s(self) -> float:
        return self.point[2]

    @property
    def z(self) -> float:
        return self.point[3]

    def partial(self, a0: int = 0, ar: int = 0, as_: int = 0, az: int = 0) -> float:
        return jets.extract_partial(self.jet, (a0, ar, as_, az))

    @property
    def phi(self) -> float:
        return self.jet.value

    def partials_dict(self) -> dict[tuple[int, int, int, int], float]:
        return {idx: self.partial(*idx) for idx in self.jet.space.indices}


def phi_table(spec: MetricSpec, p: SamplePoint | tuple[float, float, float, float],
              order: int = DEFAULT_TABLE_ORDER, check_domain: bool = True) -> PhiTable:
    """Fill the phi-derivative table by one jet evaluation at the point."""
    if isinstance(p, SamplePoint):
        pt = (p.x0, p.r, p.s, p.z)
    else:
        pt = tuple(float(v) for v in p)
    if check_domain and not spec.domain.contains(*pt):
        raise DomainError(f"point {pt} outside domain of metric {spec.name!r}")
    space = jets.jet_space(PHI_VARIABLES, order)
    env = {name: jets.jet_var(space, name, val) for name, val in zip(PHI_VARIABLES, pt)}
    jet = dsl.eval_jet(spec.phi, env, spec.params)
    if jet.value <= 0.0:
        raise NonPositivePhi(f"phi({pt}) = {jet.value!r} <= 0")
    return PhiTable(pt, jet)


def omega(t: PhiTable) -> float:
    """Omega = phi - s*phi_s - z*phi_z."""
    return t.phi - t.s * t.partial(as_=1) - t.z * t.partial(az=1)


def lambda_(t: PhiTable, r: float | None = None, s: float | None = None) -> float:
    """Lambda = Omega*phi_zz + (r^2 - s^2)*(phi_ss*phi_zz - phi_sz^2)."""
    r = t.r if r is None else r
    s = t.s if s is None else s
    phi_zz = t.partial(az=2)
    phi_ss = t.partial(as_=2)
    phi_sz = t.partial(as_=1, az=1)
    return omega(t) * phi_zz + (r * r - s * s) * (phi_ss * phi_zz - phi_sz * phi_sz)


def finsler_value(spec: MetricSpec, p: SamplePoint) -> float:
    """F(x, y) = |ybar| * phi(x0, r, s, z)."""
    env = {"x0": p.x0, "r": p.r, "s": p.s, "z": p.z}
    return p.u * dsl.eval_value(spec.phi, env, spec.params)


def fundamental_tensor(spec: MetricSpec, p: SamplePoint) -> np.ndarray:
    """g_AB = (1/2) d^2(F^2)/dy^A dy^B, an (n+1)x(n+1) symmetric matrix.

    Computed with order-2 jets in the n+1 fiber variables, independent of any
    closed-form machinery, so it doubles as the validity oracle.
    """
    n = p.n
    yvars = tuple(f"y{i}" for i in range(n + 1))
    space = jets.jet_space(yvars, 2)
    yj = [jets.jet_var(space, "y0", p.y0)]
    for i in range(1, n + 1):
        yj.append(jets.jet_var(space, f"y{i}", p.ybar[i - 1]))
    u2 = yj[1] * yj[1]
    for i in range(2, n + 1):
        u2 = u2 + yj[i] * yj[i]
    u = jets.jet_apply("sqrt", u2)
    sdot = sum(p.xbar[i - 1] * yj[i] for i in range(1, n + 1))
    env = {
        "x0": jets.jet_const(space, p.x0),
        "r": jets.jet_const(space, p.r),
        "s": sdot / u,
        "z": yj[0] / u,
    }
    phi = dsl.eval_jet(spec.phi, env, spec.params)
    f2 = (u * phi) * (u * phi)
    g = np.zeros((n + 1, n + 1))
    for a in range(n + 1):
        for b in range(a, n + 1):
            idx = {f"y{a}": 1}
            if a == b:
                idx = {f"y{a}": 2}
            else:
                idx[f"y{b}"] = 1
            g[a, b] = g[b, a] = 0.5 * jets.extract_partial(f2, idx)
    return g


@dataclass
class ValidityReport:
    """Grid sweep of the validity criterion and the Hessian oracle."""

    spec_name: str
    n: int
    grid_points: int
    min_phi: float
    min_omega: float
    min_lambda: float
    min_eigenvalue: float
    criterion_pass: bool
    oracle_pass: bool
    disagreements: int

    @property
    def passed(self) -> bool:
        return self.criterion_pass and self.oracle_pass and self.disagreements == 0


def validate(spec: MetricSpec, grid: GridSpec | None = None, threads: int = 1) -> ValidityReport:
    """Check phi > 0 and Lambda > 0 (plus Omega > 0 when n >= 3) over the grid,
    against the independent positive-definite-Hessian oracle."""
    from ._util import parallel_map

    grid = grid or GridSpec(spec.domain)
    pts = grid.point_list()

    def one(pt):
        x0, r, s, z = pt
        try:
            t = phi_table(spec, pt, order=2, check_domain=False)
        except NonPositivePhi:
            # phi <= 0 fails the criterion at this point outright
            return 0.0, 0.0, 0.0, 0.0, False, False
        om, lam = omega(t), lambda_(t)
        crit = t.phi > 0.0 and lam > 0.0 and (spec.n < 3 or om > 0.0)
        g = fundamental_tensor(spec, canonical_point(x0, r, s, z, n=spec.n))
        eigs = np.linalg.eigvalsh(g)
        floor = EIGENVALUE_FLOOR * max(abs(eigs[0]), abs(eigs[-1]))
        orc = bool(eigs[0] > floor)
        return t.phi, om, lam, float(eigs[0]), crit, orc

    rows = parallel_map(one, pts, threads)
    phis = [r[0] for r in rows]
    oms = [r[1] for r in rows]
    lams = [r[2] for r in rows]
    eigs = [r[3] for r in rows]
    disagreements = sum(1 for r in rows if r[4] != r[5])
    return ValidityReport(
        spec_name=spec.name,
        n=spec.n,
        grid_points=len(pts),
        min_phi=min(phis),
        min_omega=min(oms),
        min_lambda=min(lams),
        min_eigenvalue=min(eigs),
        criterion_pass=all(r[4] for r in rows),
        oracle_pass=all(r[5] for r in rows),
        disagreements=disagreements,
    )

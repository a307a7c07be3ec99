"""The radial differential operator psi(T) = -s*T_s - z*T_z and its calculus.

Everything curvature-shaped in this package reduces to nested applications of
this operator to functions of (s, z).  The `PsiCalc` helper applies it to
(s, z)-jets anchored at a base point; each application consumes one order of
the jet, so an order-3 input supports the triple-nested expressions the
curvature formulas need.

The module also verifies, numerically on grids, the nine scalar operator
identities and the five fiber-derivative expansion identities that justify
the closed-form curvature assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import dsl, jets
from .errors import DomainError, ZDivision
from .metric import SamplePoint

SZ = ("s", "z")


def cyc3(f: Callable[[int, int, int], float], j: int, k: int, l: int) -> float:
    """Three-term cyclic sum f(j,k,l) + f(k,l,j) + f(l,j,k)."""
    return f(j, k, l) + f(k, l, j) + f(l, j, k)


def cyc2(f: Callable[[int, int], float], k: int, l: int) -> float:
    """Two-index swap sum f(k,l) + f(l,k)."""
    return f(k, l) + f(l, k)


@dataclass(frozen=True)
class PsiCalc:
    """psi-calculus over (s, z)-jets anchored at the base point (s, z)."""

    s: float
    z: float

    def svar(self, space: jets.JetSpace) -> jets.Jet:
        return jets.jet_var(space, "s", self.s)

    def zvar(self, space: jets.JetSpace) -> jets.Jet:
        return jets.jet_var(space, "z", self.z)

    def psi(self, theta: jets.Jet) -> jets.Jet:
        """psi(T) = -s*T_s - z*T_z; exact one order lower than the input."""
        ds = theta.derivative("s")
        dz = theta.derivative("z")
        return -(self.svar(ds.space) * ds) - self.zvar(dz.space) * dz

    def over_z(self, theta: jets.Jet, power: int = 1) -> jets.Jet:
        if self.z == 0.0:
            raise ZDivision("division by z at z = 0")
        return theta / (self.zvar(theta.space) ** power)

    def times_z(self, theta: jets.Jet, power: int = 1) -> jets.Jet:
        return theta * (self.zvar(theta.space) ** power)

    # common nested shapes ---------------------------------------------------

    def psi_val(self, theta: jets.Jet) -> float:
        return self.psi(theta).value

    def z2psi(self, theta: jets.Jet) -> jets.Jet:
        """z^2 * psi(T)."""
        inner = self.psi(theta)
        return self.times_z(inner, 2)


@dataclass(frozen=True)
class ThetaField:
    """A scalar test function of (s, z), with optional parameters."""

    expr: dsl.Expression
    params: Mapping[str, float] = field(default_factory=dict)

    def jet_at(self, s: float, z: float, order: int = 5) -> jets.Jet:
        space = jets.jet_space(SZ, order)
        env = {
            "s": jets.jet_var(space, "s", s),
            "z": jets.jet_var(space, "z", z),
            "x0": jets.jet_const(space, 0.0),
            "r": jets.jet_const(space, 1.0),
        }
        return dsl.eval_jet(self.expr, env, self.params)


def theta_field(text: str, params: Mapping[str, float] | None = None) -> ThetaField:
    params = dict(params or {})
    return ThetaField(dsl.parse(text, params), params)


def psi(theta: ThetaField, at: tuple[float, float]) -> float:
    """psi(T) = -s*T_s - z*T_z evaluated at the point."""
    s, z = at
    j = theta.jet_at(s, z, order=1)
    c = PsiCalc(s, z)
    return c.psi_val(j)


# --- the nine scalar identities ----------------------------------------------


def _scalar_identities() -> list[tuple[str, Callable]]:
    """Each entry returns (LHS - RHS) evaluated exactly via jets."""

    def i1(th, c):
        # psi(z^2 psi(T/z^2)) = -s*z*psi(T_s/z) - z^2*psi(T_z/z)
        lhs = c.psi_val(c.z2psi(c.over_z(th, 2)))
        rhs = (-c.s * c.z * c.psi_val(c.over_z(th.derivative("s")))
               - c.z ** 2 * c.psi_val(c.over_z(th.derivative("z"))))
        return lhs - rhs

    def i2(th, c):
        # (1/z) psi(z^2 psi(T/z)) = -s*psi(T_s) - z*psi(T_z) - z*psi(T/z)
        lhs = c.psi_val(c.z2psi(c.over_z(th))) / c.z
        rhs = (-c.s * c.psi_val(th.derivative("s"))
               - c.z * c.psi_val(th.derivative("z"))
               - c.z * c.psi_val(c.over_z(th)))
        return lhs - rhs

    def i3(th, c):
        # (1/z^2) psi(z^2 psi(T)) = -3*psi(T) - s*psi(T_s) - z*psi(T_z)
        lhs = c.psi_val(c.z2psi(th)) / c.z ** 2
        rhs = (-3.0 * c.psi_val(th)
               - c.s * c.psi_val(th.derivative("s"))
               - c.z * c.psi_val(th.derivative("z")))
        return lhs - rhs

    def i4(th, c):
        # psi(T_z) = psi_z(T) + T_z
        lhs = c.psi_val(th.derivative("z"))
        rhs = c.psi(th).derivative("z").value + th.derivative("z").value
        return lhs - rhs

    def i5(th, c):
        # z*psi_z(T) = psi(z*T_z)
        lhs = c.z * c.psi(th).derivative("z").value
        rhs = c.psi_val(c.times_z(th.derivative("z")))
        return lhs - rhs

    def i6(th, c):
        # z*psi_s(T/z) = psi(T_s)
        lhs = c.z * c.psi(c.over_z(th)).derivative("s").value
        rhs = c.psi_val(th.derivative("s"))
        return lhs - rhs

    def i7(th, c):
        # (z*psi(T/z))_z = psi(T_z)
        lhs = c.times_z(c.psi(c.over_z(th))).derivative("z").value
        rhs = c.psi_val(th.derivative("z"))
        return lhs - rhs

    def i8(th, c):
        # (1/z^2) psi(z^2 psi(z^2 psi(T/z^2)))
        #    = -2 psi(z^2 psi(T/z^2)) - (s/z) psi(z^2 psi(T_s/z)) - psi(z^2 psi(T_z/z))
        lhs = c.psi_val(c.z2psi(c.z2psi(c.over_z(th, 2)))) / c.z ** 2
        rhs = (-2.0 * c.psi_val(c.z2psi(c.over_z(th, 2)))
               - (c.s / c.z) * c.psi_val(c.z2psi(c.over_z(th.derivative("s"))))
               - c.psi_val(c.z2psi(c.over_z(th.derivative("z")))))
        return lhs - rhs

    def i9(th, c):
        # (1/z^2) psi(z^2 psi(z^2 psi(T/z)))
        #    = -3 psi(z^2 psi(T/z)) - (s/z) psi(z^2 psi(T_s)) - psi(z^2 psi(T_z))
        lhs = c.psi_val(c.z2psi(c.z2psi(c.over_z(th)))) / c.z ** 2
        rhs = (-3.0 * c.psi_val(c.z2psi(c.over_z(th)))
               - (c.s / c.z) * c.psi_val(c.z2psi(th.derivative("s")))
               - c.psi_val(c.z2psi(th.derivative("z"))))
        return lhs - rhs

    return [
        ("double_nest_of_ratio_z2", i1),
        ("double_nest_of_ratio_z1", i2),
        ("double_nest_plain", i3),
        ("z_derivative_commutator", i4),
        ("z_derivative_product", i5),
        ("s_derivative_of_ratio", i6),
        ("z_derivative_of_scaled", i7),
        ("triple_nest_of_ratio_z2", i8),
        ("triple_nest_of_ratio_z1", i9),
    ]


SCALAR_IDENTITY_NAMES = tuple(name for name, _ in _scalar_identities())


@dataclass
class IdentityReport:
    rows: list[tuple[str, float]]
    grid_points: int

    @property
    def max_residual(self) -> float:
        return max(res for _, res in self.rows)

    def as_dict(self) -> dict:
        return {name: res for name, res in self.rows}


def default_sz_grid() -> list[tuple[float, float]]:
    svals = [-0.8, -0.3, 0.2, 0.6, 0.9]
    zvals = [0.2, 0.6, 1.0, 1.5, 2.0]
    return [(s, z) for s in svals for z in zvals]


def verify_identities(theta: ThetaField,
                      grid: Sequence[tuple[float, float]] | None = None) -> IdentityReport:
    """Max |LHS - RHS| of each scalar identity over the (s, z) grid."""
    grid = list(grid) if grid is not None else default_sz_grid()
    idents = _scalar_identities()
    worst = [0.0] * len(idents)
    for s, z in grid:
        th = theta.jet_at(s, z, order=5)
        c = PsiCalc(s, z)
        for i, (_, fn) in enumerate(idents):
            worst[i] = max(worst[i], abs(fn(th, c)))
    rows = [(name, worst[i]) for i, (name, _) in enumerate(idents)]
    return IdentityReport(rows=rows, grid_points=len(grid))


# --- fiber-derivative (vector) identities --------------------------------------

VECTOR_IDENTITY_NAMES = (
    "dtheta_dy0",
    "dtheta_dyl",
    "d_theta_ul",
    "d_theta_ukul",
    "d_theta_ukului",
)


def verify_vector_identities(theta: dsl.Expression, p: SamplePoint,
                             params: Mapping[str, float] | None = None) -> IdentityReport:
    """Check the closed forms for fiber derivatives of T, T*u_l, T*u_k*u_l,
    T*u_k*u_l*u_i against true y-derivatives taken with raw jets."""
    params = dict(params or {})
    n = p.n
    if n < 3:
        raise DomainError("vector identities need n >= 3")
    yvars = tuple(f"y{i}" for i in range(n + 1))
    space = jets.jet_space(yvars, 1)
    yj = [jets.jet_var(space, f"y{i}", v) for i, v in enumerate((p.y0, *p.ybar))]
    u2 = yj[1] * yj[1]
    dot = p.xbar[0] * yj[1]
    for i in range(2, n + 1):
        u2 = u2 + yj[i] * yj[i]
        dot = dot + p.xbar[i - 1] * yj[i]
    uj = jets.jet_apply("sqrt", u2)
    env = {"x0": jets.jet_const(space, p.x0), "r": jets.jet_const(space, p.r),
           "s": dot / uj, "z": yj[0] / uj}
    theta_y = dsl.eval_jet(theta, env, params)
    ul_y = [yj[i] / uj for i in range(1, n + 1)]

    s, z, u = p.s, p.z, p.u
    x = p.xbar
    uv = [v / u for v in p.ybar]
    c = PsiCalc(s, z)
    szspace = jets.jet_space(SZ, 4)
    sz_env = {"s": jets.jet_var(szspace, "s", s), "z": jets.jet_var(szspace, "z", z),
              "x0": jets.jet_const(szspace, p.x0), "r": jets.jet_const(szspace, p.r)}
    th = dsl.eval_jet(theta, sz_env, params)
    th_val = th.value
    th_s = th.derivative("s").value
    th_z = th.derivative("z").value
    psi_th = c.psi_val(th)
    psi_z1 = c.psi_val(c.times_z(th, 1))
    psi_z2 = c.psi_val(c.times_z(th, 2))
    psi_z3 = c.psi_val(c.times_z(th, 3))

    def d(jet, i):
        return jets.extract_partial(jet, {f"y{i}": 1})

    def delta(a, b):
        return 1.0 if a == b else 0.0

    worst = [0.0] * 5
    # dT/dy0 = T_z / u
    worst[0] = abs(d(theta_y, 0) - th_z / u)
    # u dT/dy^l = T_s x^l + psi(T) u_l
    for l in range(1, n + 1):
        lhs = u * d(theta_y, l)
        rhs = th_s * x[l - 1] + psi_th * uv[l - 1]
        worst[1] = max(worst[1], abs(lhs - rhs))
    # u d(T u_l)/dy^k = T d_kl + T_s x^k u_l + (1/z) psi(zT) u_k u_l
    for l in range(1, n + 1):
        prod = theta_y * ul_y[l - 1]
        for k in range(1, n + 1):
            lhs = u * d(prod, k)
            rhs = (th_val * delta(k, l) + th_s * x[k - 1] * uv[l - 1]
                   + psi_z1 / z * uv[k - 1] * uv[l - 1])
            worst[2] = max(worst[2], abs(lhs - rhs))
    # u d(T u_k u_l)/dy^j
    for k in range(1, n + 1):
        for l in range(1, n + 1):
            prod = theta_y * ul_y[k - 1] * ul_y[l - 1]
            for j in range(1, n + 1):
                lhs = u * d(prod, j)
                rhs = (th_val * (delta(j, k) * uv[l - 1] + delta(j, l) * uv[k - 1])
                       + th_s * x[j - 1] * uv[k - 1] * uv[l - 1]
                       + psi_z2 / z ** 2 * uv[j - 1] * uv[k - 1] * uv[l - 1])
                worst[3] = max(worst[3], abs(lhs - rhs))
    # u d(T u_k u_l u_i)/dy^j
    for k in range(1, n + 1):
        for l in range(1, n + 1):
            for i in range(1, n + 1):
                prod = theta_y * ul_y[k - 1] * ul_y[l - 1] * ul_y[i - 1]
                for j in range(1, n + 1):
                    lhs = u * d(prod, j)
                    rhs = (th_val * (delta(j, k) * uv[l - 1] * uv[i - 1]
                                     + delta(j, l) * uv[i - 1] * uv[k - 1]
                                     + delta(j, i) * uv[k - 1] * uv[l - 1])
                           + th_s * x[j - 1] * uv[k - 1] * uv[l - 1] * uv[i - 1]
                           + psi_z3 / z ** 3 * uv[j - 1] * uv[k - 1] * uv[l - 1] * uv[i - 1])
                    worst[4] = max(worst[4], abs(lhs - rhs))
    rows = list(zip(VECTOR_IDENTITY_NAMES, worst))
    return IdentityReport(rows=rows, grid_points=1)


def default_theta_corpus() -> list[ThetaField]:
    """Ten test functions spanning polynomial, rational-free, and transcendental shapes."""
    texts = [
        "1",
        "s^2*z",
        "s*z",
        "s^3 - 2*s*z^2 + z^3",
        "exp(s)*arctan(z)",
        "sqrt(z^2+1)",
        "sqrt(z^2+s^2+1)",
        "sin(s)*cos(z)",
        "exp(0.3*s - 0.2*z)",
        "z*sqrt(s^2+2) + s^2*z^2",
    ]
    return [theta_field(t) for t in texts]

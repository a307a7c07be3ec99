"""Geodesic spray coefficients.

Closed form: G^0 = u^2*N, G^i = u^2*W*u_i + u^2*U*x^i with

    varphi = z*phi_x0 + (s/r)*phi_r + phi_s
    p1 = varphi_s - (2/r)*phi_r
    p2 = varphi_z - 2*phi_x0
    U = (p1*phi_zz - p2*phi_sz) / (2*Lambda)
    L = (-(r^2-s^2)*p1*phi_sz + p2*(Omega + (r^2-s^2)*phi_ss)) / (2*Lambda)
    V = (p1*phi_sz - p2*phi_ss) / (2*Lambda)
    W = (varphi/2 - s*phi*U - phi_z*L - (r^2-s^2)*phi_s*U) / phi
    N = z*(W + s*U) + L

The quantity pipeline `quantities_generic` is ring-generic: fed with plain
floats it produces the scalar `SprayQuantities`; fed with (s, z)-jets it
produces the derivative tables the curvature module assembles from.

The oracle path computes G^A = (1/4) g^{AB} ([F^2]_{x^C y^B} y^C - [F^2]_{x^B})
entirely with jets in the raw coordinates (x^0, xbar, y^0, ybar), making no
use of the (r, s, z) reduction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dsl, jets
from .errors import (
    ConsistencyError,
    SingularLambda,
    SingularMetric,
    SingularOmega,
    SingularPhiZZ,
)
from .metric import MetricSpec, PhiTable, SamplePoint, phi_table

#: Scalar general-path vs Corollary shortcut agreement bound (s-independent metrics).
SHORTCUT_TOL = 1e-10


@dataclass(frozen=True)
class SprayQuantities:
    N: float
    W: float
    L: float
    U: float
    V: float
    varphi: float
    p1: float
    p2: float


@dataclass(frozen=True)
class SprayCoefficients:
    G: tuple[float, ...]  # length n+1, index 0..n


def _base(x) -> float:
    return x.value if isinstance(x, jets.Jet) else float(x)


def quantities_generic(pp: Callable[[int, int, int, int], object], s, z, r: float):
    """Evaluate the spray-quantity formulas over any commutative ring.

    `pp(a0, ar, as_, az)` returns the phi-partial of that index as a ring
    element; `s` and `z` are ring elements; `r` is a plain positive float.
    Returns (N, W, L, U, V, varphi, p1, p2, Omega, Lambda_) as ring elements.
    """
    phi = pp(0, 0, 0, 0)
    phi_x0, phi_r, phi_s, phi_z = pp(1, 0, 0, 0), pp(0, 1, 0, 0), pp(0, 0, 1, 0), pp(0, 0, 0, 1)
    phi_ss, phi_sz, phi_zz = pp(0, 0, 2, 0), pp(0, 0, 1, 1), pp(0, 0, 0, 2)
    phi_x0s, phi_x0z = pp(1, 0, 1, 0), pp(1, 0, 0, 1)
    phi_rs, phi_rz = pp(0, 1, 1, 0), pp(0, 1, 0, 1)

    omega = phi - s * phi_s - z * phi_z
    rr = r * r
    q = rr - s * s
    lam = omega * phi_zz + q * (phi_ss * phi_zz - phi_sz * phi_sz)
    if _base(lam) == 0.0:
        raise SingularLambda(f"Lambda = 0 at r={r!r}, s={_base(s)!r}, z={_base(z)!r}")

    varphi = z * phi_x0 + (s / r) * phi_r + phi_s
    p1 = z * phi_x0s - phi_r / r + (s / r) * phi_rs + phi_ss
    p2 = z * phi_x0z - phi_x0 + (s / r) * phi_rz + phi_sz

    upper = 0.5 / lam
    u_q = (p1 * phi_zz - p2 * phi_sz) * upper
    l_q = (q * phi_sz * p1 * (-1.0) + p2 * (omega + q * phi_ss)) * upper
    v_q = (p1 * phi_sz - p2 * phi_ss) * upper
    w_q = (varphi * 0.5 - s * phi * u_q - phi_z * l_q - q * phi_s * u_q) / phi
    n_q = z * (w_q + s * u_q) + l_q
    return n_q, w_q, l_q, u_q, v_q, varphi, p1, p2, omega, lam


def _shortcut_quantities(t: PhiTable, s: float, z: float, r: float):
    """Corollary forms for s-independent phi (direct substitution).

    Note: the W below carries +s/(2r)*phi_r, the sign forced by substituting
    phi_s = 0 into the general formula; see the spray tests for the numerical
    arbitration against the raw-coordinate oracle.
    """
    phi = t.phi
    phi_x0, phi_r, phi_z = t.partial(a0=1), t.partial(ar=1), t.partial(az=1)
    phi_zz, phi_x0z, phi_rz = t.partial(az=2), t.partial(a0=1, az=1), t.partial(ar=1, az=1)
    om = phi - z * phi_z
    if om == 0.0:
        raise SingularOmega("phi - z*phi_z = 0 on the shortcut path")
    if phi_zz == 0.0:
        raise SingularPhiZZ("phi_zz = 0 on the shortcut path")
    u_q = -phi_r / (2.0 * r * om)
    l_q = (z * phi_x0z + (s / r) * phi_rz - phi_x0) / (2.0 * phi_zz)
    w_q = (0.5 * z * phi_x0 + s / (2.0 * r) * phi_r - s * phi * u_q - phi_z * l_q) / phi
    n_q = z * (w_q + s * u_q) + l_q
    return n_q, w_q, l_q, u_q


def spray_quantities(t: PhiTable, r: float | None = None, s: float | None = None,
                     check_shortcut: bool | None = None,
                     s_independent: bool = False) -> SprayQuantities:
    """Scalar spray quantities at the table's point.

    For s-independent metrics the Corollary shortcut forms are also computed
    and must agree with the general path to SHORTCUT_TOL.
    """
    r = t.r if r is None else r
    s = t.s if s is None else s
    z = t.z

    def pp(a0, ar, as_, az):
        return t.partial(a0, ar, as_, az)

    n_q, w_q, l_q, u_q, v_q, varphi, p1, p2, _, _ = quantities_generic(pp, s, z, r)
    run_shortcut = s_independent if check_shortcut is None else check_shortcut
    if run_shortcut:
        n2, w2, l2, u2 = _shortcut_quantities(t, s, z, r)
        worst = max(abs(n_q - n2), abs(w_q - w2), abs(l_q - l2), abs(u_q - u2))
        if worst > SHORTCUT_TOL * max(1.0, abs(n_q), abs(w_q), abs(l_q), abs(u_q)):
            raise ConsistencyError(
                f"general vs s-independent shortcut spray quantities differ by {worst!r}")
    return SprayQuantities(N=n_q, W=w_q, L=l_q, U=u_q, V=v_q, varphi=varphi, p1=p1, p2=p2)


def spray(spec: MetricSpec, p: SamplePoint, table: PhiTable | None = None) -> SprayCoefficients:
    """Closed-form geodesic spray coefficients G^A at a sample point."""
    t = table if table is not None else phi_table(spec, p, order=2, check_domain=False)
    q = spray_quantities(t, s_independent=spec.s_independent)
    u = p.u
    u2 = u * u
    g0 = u2 * q.N
    gs = [u2 * q.W * (yi / u) + u2 * q.U * xi for xi, yi in zip(p.xbar, p.ybar)]
    return SprayCoefficients(G=(g0, *gs))


# --- raw-coordinate oracle ---------------------------------------------------


def _raw_f2_jet(spec: MetricSpec, p: SamplePoint, order: int) -> tuple[jets.Jet, tuple[str, ...], tuple[str, ...]]:
    """F^2 as a jet in all 2(n+1) raw coordinates at the point."""
    n = p.n
    xvars = tuple(f"x{i}" for i in range(n + 1))
    yvars = tuple(f"y{i}" for i in range(n + 1))
    space = jets.jet_space(xvars + yvars, order)
    xj = [jets.jet_var(space, f"x{i}", v) for i, v in enumerate((p.x0, *p.xbar))]
    yj = [jets.jet_var(space, f"y{i}", v) for i, v in enumerate((p.y0, *p.ybar))]
    u2 = yj[1] * yj[1]
    r2 = xj[1] * xj[1]
    dot = xj[1] * yj[1]
    for i in range(2, n + 1):
        u2 = u2 + yj[i] * yj[i]
        r2 = r2 + xj[i] * xj[i]
        dot = dot + xj[i] * yj[i]
    u = jets.jet_apply("sqrt", u2)
    env = {
        "x0": xj[0],
        "r": jets.jet_apply("sqrt", r2),
        "s": dot / u,
        "z": yj[0] / u,
    }
    phi = dsl.eval_jet(spec.phi, env, spec.params)
    f = u * phi
    return f * f, xvars, yvars


def spray_oracle(spec: MetricSpec, p: SamplePoint) -> SprayCoefficients:
    """Spray coefficients from raw-coordinate jets (no (r, s, z) reduction)."""
    n = p.n
    f2, xvars, yvars = _raw_f2_jet(spec, p, order=2)
    yvals = (p.y0, *p.ybar)
    g = np.zeros((n + 1, n + 1))
    v = np.zeros(n + 1)
    for b in range(n + 1):
        for a in range(b, n + 1):
            idx = {yvars[a]: 2} if a == b else {yvars[a]: 1, yvars[b]: 1}
            g[a, b] = g[b, a] = 0.5 * jets.extract_partial(f2, idx)
        acc = -jets.extract_partial(f2, {xvars[b]: 1})
        for c in range(n + 1):
            acc += jets.extract_partial(f2, {xvars[c]: 1, yvars[b]: 1}) * yvals[c]
        v[b] = acc
    try:
        sol = np.linalg.solve(g, v)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric(str(exc)) from exc
    return SprayCoefficients(G=tuple(0.25 * float(x) for x in sol))


def spray_oracle_jets(spec: MetricSpec, p: SamplePoint, yorder: int) -> list[jets.Jet]:
    """G^A as jets of order `yorder` in the fiber variables (y^0 .. y^n).

    The same standard-form formula as `spray_oracle`, with every ingredient
    carried as a y-jet so that y-derivatives of G^A are exact.
    """
    n = p.n
    f2, xvars, yvars = _raw_f2_jet(spec, p, order=yorder + 2)
    ysub = jets.jet_space(yvars, yorder)
    yjets = [jets.jet_var(ysub, f"y{i}", v) for i, v in enumerate((p.y0, *p.ybar))]

    gmat = [[None] * (n + 1) for _ in range(n + 1)]
    vvec = []
    for b in range(n + 1):
        for a in range(b, n + 1):
            base = {yvars[a]: 2} if a == b else {yvars[a]: 1, yvars[b]: 1}
            gij = 0.5 * jets.sub_jet(f2, base, ysub)
            gmat[a][b] = gmat[b][a] = gij
        acc = -1.0 * jets.sub_jet(f2, {xvars[b]: 1}, ysub)
        for c in range(n + 1):
            acc = acc + jets.sub_jet(f2, {xvars[c]: 1, yvars[b]: 1}, ysub) * yjets[c]
        vvec.append(acc)

    sol = _solve_jet_system([row[:] for row in gmat], vvec)
    return [0.25 * gj for gj in sol]


def _solve_jet_system(a: list[list[jets.Jet]], b: list[jets.Jet]) -> list[jets.Jet]:
    """Gaussian elimination with partial pivoting over jet entries."""
    m = len(b)
    for col in range(m):
        piv = max(range(col, m), key=lambda rw: abs(a[rw][col].value))
        if a[piv][col].value == 0.0:
            raise SingularMetric("fundamental tensor not invertible at the point")
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = a[col][col].reciprocal()
        for rw in range(m):
            if rw == col:
                continue
            factor = a[rw][col] * inv
            for cc in range(col, m):
                a[rw][cc] = a[rw][cc] - factor * a[col][cc]
            b[rw] = b[rw] - factor * b[col]
    return [b[i] * a[i][i].reciprocal() for i in range(m)]

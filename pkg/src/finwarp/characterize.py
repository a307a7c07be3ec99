"""PDE characterizations of vanishing Berwald / Landsberg curvature, and the
numerical classifier.

All residual evaluators consume the same jet-derivative tables as the
curvature module, so the characterizations and the tensors cannot drift
apart.  The classifier combines validity, the Berwald grid max, and the
Landsberg grid max into one verdict, and flags the theoretically forbidden
combination (a regular s-independent metric that is Landsberg but not
Berwald) as an anomaly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._util import parallel_map
from .curvature import VANISH_TOL, curvature_pair, curvature_scalars, spray_derivatives
from .errors import (
    DegenerateDenominator,
    NotSIndependent,
    RankDeficientFit,
)
from .metric import (
    DEFAULT_TABLE_ORDER,
    GridSpec,
    MetricSpec,
    ValidityReport,
    canonical_point,
    phi_table,
    validate,
)

S_INDEPENDENCE_TOL = 1e-12

BERWALD_CONDITION_NAMES = (
    "u_radial_s",   # z*psi(U_s/z)
    "u_radial_z",   # z*psi(U_z/z)
    "u_zzz",
    "n_radial_s",
    "n_radial_z",
    "n_zzz",
    "w_radial",     # z*psi(W/z)
    "w_zz",
)

LANDSBERG_CONDITION_NAMES = (
    "lands_zzz",     # phi_z*N_zzz + s*Omega*U_zzz + Omega*W_zzz
    "lands_szz",     # phi_z*N_szz + Omega*W_szz
    "lands_radial_z",  # z*phi_z*psi(N_z/z) + z*s*Omega*psi(U_z/z) + Omega*psi(W_z)
    "lands_radial_s",  # z*phi_z*psi(N_s/z) + Omega*psi(W_s)
)


@dataclass
class ResidualReport:
    rows: list[tuple[str, float]]
    grid_points: int
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(res for _, res in self.rows)

    def as_dict(self) -> dict:
        return {name: res for name, res in self.rows}

    def passes(self, tol: float) -> bool:
        return self.max_residual <= tol


def _point_scalars(spec: MetricSpec, pt: tuple[float, float, float, float]):
    t = phi_table(spec, pt, order=DEFAULT_TABLE_ORDER, check_domain=False)
    sd = spray_derivatives(t)
    return t, sd, curvature_scalars(sd)


def berwald_psi_residuals(spec: MetricSpec, grid: GridSpec | None = None,
                          threads: int = 1) -> ResidualReport:
    """The eight operator conditions equivalent to vanishing Berwald curvature
    (three on U, three on N, two on W)."""
    grid = grid or GridSpec(spec.domain)
    pts = grid.point_list()

    def one(pt):
        _, _, sc = _point_scalars(spec, pt)
        tu, tn, tw = sc["U"], sc["N"], sc["W"]
        return (
            abs(tu["zpsi_s_over_z"]), abs(tu["zpsi_z_over_z"]), abs(tu["zzz"]),
            abs(tn["zpsi_s_over_z"]), abs(tn["zpsi_z_over_z"]), abs(tn["zzz"]),
            abs(tw["zpsi_over_z"]), abs(tw["zz"]),
        )

    rows = parallel_map(one, pts, threads)
    worst = [max(r[i] for r in rows) for i in range(8)]
    return ResidualReport(rows=list(zip(BERWALD_CONDITION_NAMES, worst)),
                          grid_points=len(pts))


def landsberg_pde_residuals(spec: MetricSpec, grid: GridSpec | None = None,
                            threads: int = 1) -> ResidualReport:
    """The four conditions equivalent to vanishing Landsberg curvature for
    s-independent metrics."""
    _require_s_independent(spec, grid)
    grid = grid or GridSpec(spec.domain)
    pts = grid.point_list()

    def one(pt):
        t, sd, sc = _point_scalars(spec, pt)
        tu, tn, tw = sc["U"], sc["N"], sc["W"]
        s, z = t.s, t.z
        phi_z = t.partial(az=1)
        om = sd.omega
        e1 = phi_z * tn["zzz"] + s * om * tu["zzz"] + om * tw["zzz"]
        e2 = phi_z * tn["szz"] + om * tw["szz"]
        e3 = (phi_z * tn["zpsi_z_over_z"] + s * om * tu["zpsi_z_over_z"]
              + om * tw["psi_z"])
        e4 = phi_z * tn["zpsi_s_over_z"] + om * tw["psi_s"]
        return abs(e1), abs(e2), abs(e3), abs(e4)

    rows = parallel_map(one, pts, threads)
    worst = [max(r[i] for r in rows) for i in range(4)]
    return ResidualReport(rows=list(zip(LANDSBERG_CONDITION_NAMES, worst)),
                          grid_points=len(pts))


def _require_s_independent(spec: MetricSpec, grid: GridSpec | None) -> None:
    if spec.s_independent:
        return
    # syntactically s-dependent: allow it if phi_s vanishes numerically
    grid = grid or GridSpec(spec.domain)
    for pt in grid.point_list():
        t = phi_table(spec, pt, order=1, check_domain=False)
        if abs(t.partial(as_=1)) > S_INDEPENDENCE_TOL:
            raise NotSIndependent(
                f"phi_s = {t.partial(as_=1)!r} at {pt}; operation needs s-independence")


# --- polynomial structure fit -----------------------------------------------------


@dataclass
class PolyFit:
    """Least-squares recovery of the polynomial structure that vanishing
    Berwald curvature forces on U, L, W.

    coefficient labels: u_s2, u_sz, u_z2, u_const (U = f1 s^2/2 + f2 sz + f3 z^2/2 + f4);
    l_s2, l_sz, l_z2, l_const for the detrended L; w_s, w_z for W."""

    tables: dict[str, dict[tuple[float, float], float]]
    fit_residual: float
    pde_residuals: dict[str, float]
    grid_points: int

    @property
    def max_pde_residual(self) -> float:
        return max(self.pde_residuals.values())


POLYFIT_LABELS = ("u_s2", "u_sz", "u_z2", "u_const",
                  "l_s2", "l_sz", "l_z2", "l_const",
                  "w_s", "w_z")


def berwald_poly_fit(spec: MetricSpec, grid: GridSpec | None = None,
                     threads: int = 1) -> PolyFit:
    """At each (x0, r): sample U, L, W over the (s, z) grid, fit the Berwald
    polynomial ansatz, then check the three coupled PDEs with the fitted
    coefficient functions."""
    from .spray import spray_quantities

    grid = grid or GridSpec(spec.domain)
    pairs = grid.xr_pairs()
    tables: dict[str, dict[tuple[float, float], float]] = {lab: {} for lab in POLYFIT_LABELS}
    fit_residual = 0.0
    pde_worst = {"pde_p1": 0.0, "pde_p2": 0.0, "pde_w": 0.0}

    def one(pair):
        x0, r = pair
        szs = grid.sz_pairs(r)
        if len(szs) < 4:
            raise RankDeficientFit(f"{len(szs)} (s, z) samples cannot determine 4 coefficients")
        samples = []
        point_data = []
        for s, z in szs:
            t = phi_table(spec, (x0, r, s, z), order=2, check_domain=False)
            q = spray_quantities(t)
            samples.append((s, z, q.U, q.L, q.W))
            point_data.append((s, z, t, q))
        a_u = np.array([[s * s / 2.0, s * z, z * z / 2.0, 1.0] for s, z, *_ in samples])
        u_vec = np.array([u for *_, u, _, _ in samples])
        cu, *_ = np.linalg.lstsq(a_u, u_vec, rcond=None)
        res_u = float(np.max(np.abs(a_u @ cu - u_vec)))
        # L carries the -s*z*(f1 s^2/2 + f2 s z + f3 z^2/2) tail with U's coefficients
        l_vec = np.array([l for *_, l, _ in samples])
        tail = np.array([s * z * (cu[0] * s * s / 2.0 + cu[1] * s * z + cu[2] * z * z / 2.0)
                         for s, z, *_ in samples])
        cl, *_ = np.linalg.lstsq(a_u, l_vec + tail, rcond=None)
        res_l = float(np.max(np.abs(a_u @ cl - tail - l_vec)))
        a_w = np.array([[s, z] for s, z, *_ in samples])
        w_vec = np.array([w for *_, w in samples])
        cw, *_ = np.linalg.lstsq(a_w, w_vec, rcond=None)
        res_w = float(np.max(np.abs(a_w @ cw - w_vec)))

        # PDE residuals with the fitted polynomial quantities
        worst = [0.0, 0.0, 0.0]
        for s, z, t, q in point_data:
            u_fit = cu[0] * s * s / 2 + cu[1] * s * z + cu[2] * z * z / 2 + cu[3]
            l_fit = (cl[0] * s * s / 2 + cl[1] * s * z + cl[2] * z * z / 2 + cl[3]
                     - s * z * (cu[0] * s * s / 2 + cu[1] * s * z + cu[2] * z * z / 2))
            w_fit = cw[0] * s + cw[1] * z
            phi = t.phi
            phi_s, phi_z = t.partial(as_=1), t.partial(az=1)
            phi_ss, phi_sz, phi_zz = t.partial(as_=2), t.partial(as_=1, az=1), t.partial(az=2)
            om = phi - s * phi_s - z * phi_z
            qq = r * r - s * s
            worst[0] = max(worst[0], abs(q.p1 - 2.0 * ((om + qq * phi_ss) * u_fit + phi_sz * l_fit)))
            worst[1] = max(worst[1], abs(q.p2 - 2.0 * (qq * phi_sz * u_fit + phi_zz * l_fit)))
            worst[2] = max(worst[2], abs(q.varphi - 2.0 * (w_fit * phi + (s * phi + qq * phi_s) * u_fit
                                                           + phi_z * l_fit)))
        coeffs = (*cu, *cl, *cw)
        return max(res_u, res_l, res_w), worst, coeffs

    results = parallel_map(one, pairs, threads)
    for (x0r, (res, worst, coeffs)) in zip(pairs, results):
        fit_residual = max(fit_residual, res)
        pde_worst["pde_p1"] = max(pde_worst["pde_p1"], worst[0])
        pde_worst["pde_p2"] = max(pde_worst["pde_p2"], worst[1])
        pde_worst["pde_w"] = max(pde_worst["pde_w"], worst[2])
        for lab, val in zip(POLYFIT_LABELS, coeffs):
            tables[lab][x0r] = float(val)
    return PolyFit(tables=tables, fit_residual=fit_residual,
                   pde_residuals=pde_worst, grid_points=len(pairs))


# --- s-independent Berwald check ----------------------------------------------------


PROBE_Z = 1.0


def s_independent_berwald_check(spec: MetricSpec, grid: GridSpec | None = None,
                                threads: int = 1) -> ResidualReport:
    """Recover g1, g2 from the two coefficient equations at the probe z and
    check them across all other grid z-values.

        -phi_r/r = 2*(phi - z*phi_z)*g1        phi_x0 = z*phi_z*g2

    Both only hold with (x0, r)-dependent g's when the (non-Randers) metric is
    Berwald, so large residuals certify a non-Berwald metric."""
    _require_s_independent(spec, grid)
    grid = grid or GridSpec(spec.domain)
    pairs = grid.xr_pairs()
    d = grid.domain
    zvals = [zv for zv in grid.axis(*d.z, grid.counts[3])]

    def one(pair):
        x0, r = pair
        t = phi_table(spec, (x0, r, 0.0, PROBE_Z), order=1, check_domain=False)
        phi, phi_r, phi_z, phi_x0 = t.phi, t.partial(ar=1), t.partial(az=1), t.partial(a0=1)
        om = phi - PROBE_Z * phi_z
        if abs(om) < 1e-14 or abs(PROBE_Z * phi_z) < 1e-14:
            raise DegenerateDenominator(
                f"coefficient recovery degenerate at (x0, r) = ({x0!r}, {r!r})")
        g1 = -phi_r / (2.0 * r * om)
        g2 = phi_x0 / (PROBE_Z * phi_z)
        worst1 = worst2 = 0.0
        for z in zvals:
            tz = phi_table(spec, (x0, r, 0.0, z), order=1, check_domain=False)
            worst1 = max(worst1, abs(-tz.partial(ar=1) / r
                                     - 2.0 * (tz.phi - z * tz.partial(az=1)) * g1))
            worst2 = max(worst2, abs(tz.partial(a0=1) - z * tz.partial(az=1) * g2))
        return worst1, worst2, g1, g2

    rows = parallel_map(one, pairs, threads)
    g1_table = {pair: r[2] for pair, r in zip(pairs, rows)}
    g2_table = {pair: r[3] for pair, r in zip(pairs, rows)}
    return ResidualReport(
        rows=[("radial_coefficient", max(r[0] for r in rows)),
              ("time_coefficient", max(r[1] for r in rows))],
        grid_points=len(pairs) * len(zvals),
        extra={"g1": g1_table, "g2": g2_table},
    )


# --- classifier -------------------------------------------------------------------


VERDICTS = ("INVALID_METRIC", "BERWALD", "LANDSBERG_NOT_BERWALD", "NON_LANDSBERG")


@dataclass
class Classification:
    verdict: str
    validity: ValidityReport
    berwald_max: float
    landsberg_max: float
    tol: float
    anomaly: bool
    regularity_jump: float | None

    def as_rows(self) -> list[tuple[str, float | str | bool]]:
        return [
            ("verdict", self.verdict),
            ("berwald_grid_max", self.berwald_max),
            ("landsberg_grid_max", self.landsberg_max),
            ("min_lambda", self.validity.min_lambda),
            ("min_omega", self.validity.min_omega),
            ("min_eigenvalue", self.validity.min_eigenvalue),
            ("theorem_anomaly", self.anomaly),
        ]


def regularity_jump(spec: MetricSpec, x0: float, r: float) -> tuple[float, float]:
    """Generic non-regularity probe for s-independent metrics: one-sided third
    derivatives of theta(t) = |t|*phi(x0, r, 1/|t|) at t = 0.

    Returns (jump, scale) where scale = |theta'''(0+)| + |theta'''(0-)|."""
    from . import dsl, jets

    def theta(t: float) -> float:
        z = 1.0 / abs(t)
        env = {"x0": x0, "r": r, "s": 0.0, "z": z}
        return abs(t) * dsl.eval_value(spec.phi, env, spec.params)

    try:
        plus = jets.fd_third_one_sided(theta, 0.0, +1, h=0.01)
        minus = jets.fd_third_one_sided(theta, 0.0, -1, h=0.01)
    except Exception:  # noqa: BLE001 - theta may diverge; that also means non-regular
        return math.inf, math.inf
    if not (math.isfinite(plus) and math.isfinite(minus)):
        return math.inf, math.inf
    return plus - minus, abs(plus) + abs(minus)


#: |jump| above this (relative to the one-sided magnitudes) marks the metric
#: as non-regular, exempting it from the Landsberg-implies-Berwald check.
REGULARITY_JUMP_TOL = 1e-3


def classify(spec: MetricSpec, grid: GridSpec | None = None, tol: float = VANISH_TOL,
             threads: int = 1) -> Classification:
    """Verdict from validity plus the two curvature grid maxima.

    A LANDSBERG_NOT_BERWALD verdict for a valid s-independent metric that
    also passes the regularity probe (no third-derivative jump) contradicts
    the equivalence of the two vanishing conditions for regular metrics and
    is flagged as an anomaly rather than silently reported.
    """
    grid = grid or GridSpec(spec.domain)
    validity = validate(spec, grid, threads=threads)
    pts = grid.point_list()

    def one(pt):
        b, l = curvature_pair(spec, canonical_point(*pt, n=spec.n))
        return b.max_abs, l.max_abs

    rows = parallel_map(one, pts, threads)
    bmax = max(r[0] for r in rows)
    lmax = max(r[1] for r in rows)

    if not validity.passed:
        verdict = "INVALID_METRIC"
    elif bmax <= tol:
        verdict = "BERWALD"
    elif lmax <= tol:
        verdict = "LANDSBERG_NOT_BERWALD"
    else:
        verdict = "NON_LANDSBERG"

    anomaly = False
    jump = None
    if verdict == "LANDSBERG_NOT_BERWALD" and spec.s_independent:
        d = grid.domain
        x0m = 0.5 * (d.x0[0] + d.x0[1])
        rm = 0.5 * (d.r[0] + d.r[1])
        jump, scale = regularity_jump(spec, x0m, rm)
        regular = math.isfinite(jump) and abs(jump) <= REGULARITY_JUMP_TOL * (scale + 1.0)
        anomaly = regular
    return Classification(verdict=verdict, validity=validity, berwald_max=bmax,
                          landsberg_max=lmax, tol=tol, anomaly=anomaly,
                          regularity_jump=jump)

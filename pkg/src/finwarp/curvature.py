"""Berwald tensor B^A_BCD and Landsberg tensor L_ABC.

Closed forms assemble the tensors from (s, z)-derivative tables of the spray
quantities N, W, U.  Those tables come from ONE evaluation of the spray
pipeline with s and z promoted to order-3 jet variables (layered over the
order-6 phi-jet), so no derivative expression is ever transcribed by hand.

Independent oracles: third fiber derivatives of the raw-coordinate spray
(`berwald_oracle`), and the contraction L_ABC = (1/2) F F_{y^D} B^D_ABC
(`landsberg_oracle`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import jets
from .errors import ZDivision
from .metric import (
    DEFAULT_TABLE_ORDER,
    MetricSpec,
    PhiTable,
    SamplePoint,
    phi_table,
)
from .psi import SZ, PsiCalc, cyc2, cyc3
from .spray import quantities_generic, spray_oracle_jets

#: Classification threshold: a tensor whose grid max_abs stays below this
#: counts as vanishing.
VANISH_TOL = 1e-7


# --- symmetric dense storage ---------------------------------------------------


@lru_cache(maxsize=None)
def _sorted_triples(n: int) -> list[tuple[int, int, int]]:
    return list(itertools.combinations_with_replacement(range(n + 1), 3))


@lru_cache(maxsize=None)
def _triple_position(n: int) -> dict[tuple[int, int, int], int]:
    return {t: i for i, t in enumerate(_sorted_triples(n))}


@dataclass
class BerwaldTensor:
    """B^A_BCD, totally symmetric in (B, C, D); stored on sorted triples."""

    n: int
    components: np.ndarray  # shape (n+1, T) over sorted (B <= C <= D)
    max_abs: float

    @classmethod
    def triples(cls, n: int) -> list[tuple[int, int, int]]:
        return _sorted_triples(n)

    @classmethod
    def from_full(cls, arr: np.ndarray) -> "BerwaldTensor":
        n = arr.shape[0] - 1
        trips = _sorted_triples(n)
        comp = np.empty((n + 1, len(trips)))
        for t, (b, c, d) in enumerate(trips):
            comp[:, t] = arr[:, b, c, d]
        return cls(n=n, components=comp, max_abs=float(np.max(np.abs(comp))))

    def get(self, a: int, b: int, c: int, d: int) -> float:
        key = tuple(sorted((b, c, d)))
        return float(self.components[a, _triple_position(self.n)[key]])

    def full(self) -> np.ndarray:
        m = self.n + 1
        out = np.empty((m, m, m, m))
        for t, (b, c, d) in enumerate(_sorted_triples(self.n)):
            for p in set(itertools.permutations((b, c, d))):
                out[:, p[0], p[1], p[2]] = self.components[:, t]
        return out


@dataclass
class LandsbergTensor:
    """L_ABC, totally symmetric; stored on sorted triples."""

    n: int
    components: np.ndarray  # shape (T,) over sorted (A <= B <= C)
    max_abs: float

    @classmethod
    def from_full(cls, arr: np.ndarray) -> "LandsbergTensor":
        n = arr.shape[0] - 1
        trips = _sorted_triples(n)
        comp = np.array([arr[t] for t in trips])
        return cls(n=n, components=comp, max_abs=float(np.max(np.abs(comp))))

    def get(self, a: int, b: int, c: int) -> float:
        key = tuple(sorted((a, b, c)))
        return float(self.components[_triple_position(self.n)[key]])

    def full(self) -> np.ndarray:
        m = self.n + 1
        out = np.empty((m, m, m))
        for t, trip in enumerate(_sorted_triples(self.n)):
            for p in set(itertools.permutations(trip)):
                out[p] = self.components[t]
        return out


def y_contraction_max(tensor: BerwaldTensor | LandsbergTensor, p: SamplePoint) -> float:
    """max |T..._C y^C| over the free indices, normalized by (max_abs + 1)."""
    y = np.array((p.y0, *p.ybar))
    full = tensor.full()
    contracted = np.tensordot(full, y, axes=([full.ndim - 1], [0]))
    return float(np.max(np.abs(contracted))) / (tensor.max_abs + 1.0)


# --- derivative tables -----------------------------------------------------------


@dataclass(frozen=True)
class SprayDerivatives:
    """Order-3 (s, z)-jets of the spray quantities at one point, plus the
    handful of plain phi-values the curvature formulas multiply by."""

    N: jets.Jet
    W: jets.Jet
    U: jets.Jet
    L: jets.Jet
    V: jets.Jet
    r: float
    s: float
    z: float
    u: float
    phi: float
    phi_s: float
    phi_z: float
    omega: float

    @property
    def calc(self) -> PsiCalc:
        return PsiCalc(self.s, self.z)


def spray_derivatives(t: PhiTable, u: float = 1.0, order: int = 3) -> SprayDerivatives:
    """Promote the spray-quantity pipeline to (s, z)-jets of the given order."""
    if t.z == 0.0:
        raise ZDivision("curvature formulas are singular at z = 0")
    if t.order < order + 2 + 1:
        raise ValueError(f"phi table order {t.order} too low for derivative order {order}")
    space = jets.jet_space(SZ, order)
    svar = jets.jet_var(space, "s", t.s)
    zvar = jets.jet_var(space, "z", t.z)

    def pp(a0, ar, as_, az):
        return jets.sub_jet(t.jet, {"x0": a0, "r": ar, "s": as_, "z": az}, space)

    n_q, w_q, l_q, u_q, v_q, _, _, _, omega_j, _ = quantities_generic(pp, svar, zvar, t.r)
    return SprayDerivatives(
        N=n_q, W=w_q, U=u_q, L=l_q, V=v_q,
        r=t.r, s=t.s, z=t.z, u=u,
        phi=t.phi,
        phi_s=t.partial(as_=1),
        phi_z=t.partial(az=1),
        omega=omega_j.value,
    )


class ThetaScalars:
    """Every derivative / nested-psi value of one quantity T(s, z) that the
    curvature component formulas consume.  All entries are exact: each psi
    application consumes one order of the order-3 input jet."""

    def __init__(self, theta: jets.Jet, c: PsiCalc):
        z = c.z
        d = {}
        ds = theta.derivative("s")
        dz = theta.derivative("z")
        d["s"] = ds.value
        d["z"] = dz.value
        d["ss"] = ds.derivative("s").value
        d["sz"] = ds.derivative("z").value
        d["zz"] = dz.derivative("z").value
        d["sss"] = ds.derivative("s").derivative("s").value
        d["ssz"] = ds.derivative("s").derivative("z").value
        d["szz"] = ds.derivative("z").derivative("z").value
        d["zzz"] = dz.derivative("z").derivative("z").value

        d["psi_s"] = c.psi_val(ds)
        d["psi_z"] = c.psi_val(dz)
        d["psi_ss"] = c.psi_val(ds.derivative("s"))
        d["psi_sz"] = c.psi_val(ds.derivative("z"))
        d["psi_zz"] = c.psi_val(dz.derivative("z"))
        # psi_z(T_z) and psi_s(T_s): plain derivatives of psi(T_z), psi(T_s)
        d["dz_psi_z"] = c.psi(dz).derivative("z").value
        d["ds_psi_s"] = c.psi(ds).derivative("s").value

        d["zpsi_s_over_z"] = z * c.psi_val(c.over_z(ds))
        d["zpsi_z_over_z"] = z * c.psi_val(c.over_z(dz))
        d["nest_s"] = c.psi_val(c.z2psi(c.over_z(ds)))   # psi(z^2 psi(T_s/z))
        d["nest_z"] = c.psi_val(c.z2psi(c.over_z(dz)))   # psi(z^2 psi(T_z/z))
        d["nest_psi_s"] = c.psi_val(c.z2psi(ds))         # psi(z^2 psi(T_s))
        d["nest_psi_z"] = c.psi_val(c.z2psi(dz))         # psi(z^2 psi(T_z))
        d["psi_z_times_sz"] = c.psi_val(c.times_z(ds.derivative("z")))  # psi(z*T_sz)

        ratio2 = c.over_z(theta, 2)
        d["nest2"] = c.psi_val(c.z2psi(ratio2))                    # psi(z^2 psi(T/z^2))
        d["ds_nest2"] = c.psi(c.z2psi(ratio2)).derivative("s").value
        d["nest3_2"] = c.psi_val(c.z2psi(c.z2psi(ratio2)))         # triple nest over z^2

        ratio1 = c.over_z(theta, 1)
        d["zpsi_over_z"] = z * c.psi_val(ratio1)                   # z*psi(T/z)
        d["nest1"] = c.psi_val(c.z2psi(ratio1))                    # psi(z^2 psi(T/z))
        d["nest3_1"] = c.psi_val(c.z2psi(c.z2psi(ratio1)))         # triple nest over z
        self.v = d

    def __getitem__(self, key: str) -> float:
        return self.v[key]


def curvature_scalars(sd: SprayDerivatives) -> dict[str, ThetaScalars]:
    c = sd.calc
    return {"N": ThetaScalars(sd.N, c), "W": ThetaScalars(sd.W, c), "U": ThetaScalars(sd.U, c)}


# --- Berwald closed form ----------------------------------------------------------


def _assemble_berwald(sd: SprayDerivatives, sc: dict[str, ThetaScalars],
                      p: SamplePoint) -> BerwaldTensor:
    tn, tw, tu = sc["N"], sc["W"], sc["U"]
    n = p.n
    u = p.u
    z = sd.z
    x = p.xbar
    uv = [v / u for v in p.ybar]

    def delta(a, b):
        return 1.0 if a == b else 0.0

    def b0_000():
        return tn["zzz"] / u

    def b0_00l(l):
        return (tn["szz"] * x[l - 1] + tn["psi_zz"] * uv[l - 1]) / u

    def b0_0kl(k, l):
        return (tn["ssz"] * x[k - 1] * x[l - 1]
                + tn["psi_sz"] * (x[l - 1] * uv[k - 1] + x[k - 1] * uv[l - 1])
                + tn["zpsi_z_over_z"] * delta(k, l)
                + tn["nest_z"] / z * uv[k - 1] * uv[l - 1]) / u

    def b0_jkl(j, k, l):
        def term(a, b, cc):
            return (tn["sss"] / 3.0 * x[a - 1] * x[b - 1] * x[cc - 1]
                    + tn["psi_ss"] * x[a - 1] * x[b - 1] * uv[cc - 1]
                    + tn["zpsi_s_over_z"] * x[a - 1] * delta(b, cc)
                    + tn["nest2"] * uv[a - 1] * delta(b, cc)
                    + tn["nest_s"] / z * x[a - 1] * uv[b - 1] * uv[cc - 1]
                    + tn["nest3_2"] / (3.0 * z * z) * uv[a - 1] * uv[b - 1] * uv[cc - 1])
        return cyc3(term, j, k, l) / u

    def bi_000(i):
        return (tu["zzz"] * x[i - 1] + tw["zzz"] * uv[i - 1]) / u

    def bi_00l(i, l):
        return (tu["szz"] * x[l - 1] * x[i - 1]
                + tu["psi_zz"] * x[i - 1] * uv[l - 1]
                + tw["zz"] * delta(i, l)
                + tw["szz"] * x[l - 1] * uv[i - 1]
                + tw["dz_psi_z"] * uv[l - 1] * uv[i - 1]) / u

    def bi_0kl(i, k, l):
        main = (tu["ssz"] * x[k - 1] * x[l - 1] * x[i - 1]
                + tu["zpsi_z_over_z"] * delta(k, l) * x[i - 1]
                + tu["nest_z"] / z * uv[k - 1] * uv[l - 1] * x[i - 1]
                + tw["ssz"] * x[k - 1] * x[l - 1] * uv[i - 1]
                + tw["nest_psi_z"] / (z * z) * uv[k - 1] * uv[l - 1] * uv[i - 1])

        def swap(a, b):
            return (tu["psi_sz"] * uv[a - 1] * x[b - 1] * x[i - 1]
                    + tw["sz"] * x[a - 1] * delta(b, i)
                    + tw["psi_z_times_sz"] / z * x[b - 1] * uv[a - 1] * uv[i - 1])

        tail = tw["psi_z"] * (delta(i, l) * uv[k - 1] + delta(k, i) * uv[l - 1]
                              + delta(l, k) * uv[i - 1])
        return (main + cyc2(swap, k, l) + tail) / u

    def bi_jkl(i, j, k, l):
        def upart_cyc(a, b, cc):
            return (tu["psi_ss"] * uv[a - 1] * x[b - 1] * x[cc - 1]
                    + tu["zpsi_s_over_z"] * delta(a, b) * x[cc - 1]
                    + tu["ds_nest2"] * uv[a - 1] * uv[b - 1] * x[cc - 1]
                    + tu["nest2"] * delta(a, b) * uv[cc - 1])

        upart = (tu["sss"] * x[j - 1] * x[k - 1] * x[l - 1]
                 + tu["nest3_2"] / (z * z) * uv[j - 1] * uv[k - 1] * uv[l - 1]
                 + cyc3(upart_cyc, j, k, l)) * x[i - 1]

        def wpart_cyc(a, b, cc):
            return (tw["ss"] * delta(i, a) * x[b - 1] * x[cc - 1]
                    + tw["ds_psi_s"] * uv[i - 1] * uv[a - 1] * x[b - 1] * x[cc - 1]
                    + tw["nest_psi_s"] / (z * z) * x[a - 1] * uv[b - 1] * uv[cc - 1] * uv[i - 1])

        wpart = (cyc3(wpart_cyc, j, k, l)
                 + tw["zpsi_over_z"] * (delta(j, i) * delta(k, l) + delta(j, k) * delta(l, i)
                                        + delta(j, l) * delta(i, k))
                 + tw["psi_s"] * (
                     x[j - 1] * (uv[i - 1] * delta(k, l) + uv[k - 1] * delta(l, i)
                                 + uv[l - 1] * delta(i, k))
                     + x[k - 1] * (uv[j - 1] * delta(i, l) + uv[l - 1] * delta(i, j)
                                   + uv[i - 1] * delta(j, l))
                     + x[l - 1] * (uv[i - 1] * delta(j, k) + uv[j - 1] * delta(k, i)
                                   + uv[k - 1] * delta(i, j)))
                 + tw["nest1"] / z * (
                     delta(j, i) * uv[k - 1] * uv[l - 1] + delta(j, k) * uv[l - 1] * uv[i - 1]
                     + delta(j, l) * uv[i - 1] * uv[k - 1] + delta(i, k) * uv[l - 1] * uv[j - 1]
                     + delta(k, l) * uv[i - 1] * uv[j - 1] + delta(l, i) * uv[k - 1] * uv[j - 1])
                 + tw["sss"] * x[j - 1] * x[k - 1] * x[l - 1] * uv[i - 1]
                 + tw["nest3_1"] / z ** 3 * uv[j - 1] * uv[k - 1] * uv[l - 1] * uv[i - 1])
        return (upart + wpart) / u

    trips = _sorted_triples(n)
    comp = np.zeros((n + 1, len(trips)))
    for tpos, (b, c, d) in enumerate(trips):
        zeros = (b == 0) + (c == 0) + (d == 0)
        spatial = [ix for ix in (b, c, d) if ix != 0]
        for a in range(n + 1):
            if a == 0:
                if zeros == 3:
                    val = b0_000()
                elif zeros == 2:
                    val = b0_00l(spatial[0])
                elif zeros == 1:
                    val = b0_0kl(*spatial)
                else:
                    val = b0_jkl(b, c, d)
            else:
                if zeros == 3:
                    val = bi_000(a)
                elif zeros == 2:
                    val = bi_00l(a, spatial[0])
                elif zeros == 1:
                    val = bi_0kl(a, *spatial)
                else:
                    val = bi_jkl(a, b, c, d)
            comp[a, tpos] = val
    return BerwaldTensor(n=n, components=comp, max_abs=float(np.max(np.abs(comp))))


# --- Landsberg closed form ---------------------------------------------------------


def _assemble_landsberg(sd: SprayDerivatives, sc: dict[str, ThetaScalars],
                        p: SamplePoint) -> LandsbergTensor:
    tn, tw, tu = sc["N"], sc["W"], sc["U"]
    n = p.n
    s, z, r = sd.s, sd.z, sd.r
    phi, phi_s, phi_z, om = sd.phi, sd.phi_s, sd.phi_z, sd.omega
    c1 = phi_z
    c2 = r * r * phi_s + s * om
    c3 = s * phi_s + om
    x = p.xbar
    uv = [v / p.u for v in p.ybar]

    def delta(a, b):
        return 1.0 if a == b else 0.0

    def lb_000():
        return c1 * tn["zzz"] + c2 * tu["zzz"] + c3 * tw["zzz"]

    def lb_00l(l):
        ax = c1 * tn["szz"] + c2 * tu["szz"] + c3 * tw["szz"] + phi_s * tw["zz"]
        au = (c1 * tn["psi_zz"] + c2 * tu["psi_zz"] + c3 * tw["psi_zz"]
              - s * phi_s * tw["zz"])
        return ax * x[l - 1] + au * uv[l - 1]

    def lb_0kl(k, l):
        axx = c1 * tn["ssz"] + c2 * tu["ssz"] + c3 * tw["ssz"] + 2.0 * phi_s * tw["sz"]
        adel = c1 * tn["zpsi_z_over_z"] + c2 * tu["zpsi_z_over_z"] + c3 * tw["psi_z"]
        auu = (c1 * tn["nest_z"] / z + c2 * tu["nest_z"] / z
               + c3 * tw["nest_psi_z"] / (z * z) + 2.0 * om * tw["psi_z"])
        axu = (c1 * tn["psi_sz"] + c2 * tu["psi_sz"] + c3 * tw["psi_sz"]
               + phi_s * tw["psi_z"] - s * phi_s * tw["sz"])
        return (axx * x[k - 1] * x[l - 1]
                + adel * delta(k, l)
                + auu * uv[k - 1] * uv[l - 1]
                + axu * (x[k - 1] * uv[l - 1] + x[l - 1] * uv[k - 1]))

    def lb_jkl(j, k, l):
        a1 = (c1 * tn["sss"] + c2 * tu["sss"] + c3 * tw["sss"]) / 3.0 + phi_s * tw["ss"]
        a2 = (c1 * tn["psi_ss"] + c2 * tu["psi_ss"] + c3 * tw["psi_ss"]
              + 2.0 * phi_s * tw["psi_s"] - s * phi_s * tw["ss"])
        a3 = (c1 * tn["nest3_2"] / (3.0 * z * z) + c2 * tu["nest3_2"] / (3.0 * z * z)
              + c3 * tw["nest3_1"] / (3.0 * z ** 3) + om * tw["nest1"] / z)
        a4 = (c1 * tn["zpsi_s_over_z"] + c2 * tu["zpsi_s_over_z"] + c3 * tw["psi_s"]
              + phi_s * tw["zpsi_over_z"])
        a5 = (c1 * tn["nest_s"] / z + c2 * tu["nest_s"] / z
              + c3 * tw["nest_psi_s"] / (z * z) + phi_s * tw["nest1"] / z
              + 2.0 * om * tw["psi_s"])
        a6 = (c1 * tn["nest2"] + c2 * tu["nest2"] + c3 * tw["nest1"] / z
              + om * tw["zpsi_over_z"])

        def xxx(a, b, cc):
            return x[a - 1] * x[b - 1] * x[cc - 1]

        def uxx(a, b, cc):
            return uv[a - 1] * x[b - 1] * x[cc - 1]

        def uuu(a, b, cc):
            return uv[a - 1] * uv[b - 1] * uv[cc - 1]

        def dx(a, b, cc):
            return delta(a, b) * x[cc - 1]

        def uux(a, b, cc):
            return uv[a - 1] * uv[b - 1] * x[cc - 1]

        def du(a, b, cc):
            return delta(a, b) * uv[cc - 1]

        return (a1 * cyc3(xxx, j, k, l) + a2 * cyc3(uxx, j, k, l) + a3 * cyc3(uuu, j, k, l)
                + a4 * cyc3(dx, j, k, l) + a5 * cyc3(uux, j, k, l) + a6 * cyc3(du, j, k, l))

    trips = _sorted_triples(n)
    comp = np.zeros(len(trips))
    for tpos, (a, b, cc) in enumerate(trips):
        zeros = (a == 0) + (b == 0) + (cc == 0)
        spatial = [ix for ix in (a, b, cc) if ix != 0]
        if zeros == 3:
            val = lb_000()
        elif zeros == 2:
            val = lb_00l(spatial[0])
        elif zeros == 1:
            val = lb_0kl(*spatial)
        else:
            val = lb_jkl(a, b, cc)
        comp[tpos] = 0.5 * phi * val
    return LandsbergTensor(n=n, components=comp, max_abs=float(np.max(np.abs(comp))))


def point_context(spec: MetricSpec, p: SamplePoint,
                  table: PhiTable | None = None) -> tuple[SprayDerivatives, dict[str, ThetaScalars]]:
    t = table if table is not None else phi_table(spec, p, order=DEFAULT_TABLE_ORDER,
                                                  check_domain=False)
    sd = spray_derivatives(t, u=p.u)
    return sd, curvature_scalars(sd)


def berwald_closed(spec: MetricSpec, p: SamplePoint,
                   table: PhiTable | None = None) -> BerwaldTensor:
    sd, sc = point_context(spec, p, table)
    return _assemble_berwald(sd, sc, p)


def landsberg_closed(spec: MetricSpec, p: SamplePoint,
                     table: PhiTable | None = None) -> LandsbergTensor:
    sd, sc = point_context(spec, p, table)
    return _assemble_landsberg(sd, sc, p)


def curvature_pair(spec: MetricSpec, p: SamplePoint,
                   table: PhiTable | None = None) -> tuple[BerwaldTensor, LandsbergTensor]:
    """Both tensors from one shared derivative-table computation."""
    sd, sc = point_context(spec, p, table)
    return _assemble_berwald(sd, sc, p), _assemble_landsberg(sd, sc, p)


# --- oracles --------------------------------------------------------------------


def berwald_oracle(spec: MetricSpec, p: SamplePoint) -> BerwaldTensor:
    """B^A_BCD = d^3 G^A / dy^B dy^C dy^D with G^A from the raw-coordinate spray."""
    n = p.n
    gjets = spray_oracle_jets(spec, p, yorder=3)
    m = n + 1
    full = np.zeros((m, m, m, m))
    for a in range(m):
        for b, c, d in _sorted_triples(n):
            idx: dict[str, int] = {}
            for ix in (b, c, d):
                idx[f"y{ix}"] = idx.get(f"y{ix}", 0) + 1
            val = jets.extract_partial(gjets[a], idx)
            for perm in set(itertools.permutations((b, c, d))):
                full[a, perm[0], perm[1], perm[2]] = val
    return BerwaldTensor.from_full(full)


def landsberg_oracle(spec: MetricSpec, p: SamplePoint,
                     berwald: BerwaldTensor | None = None) -> LandsbergTensor:
    """L_ABC = (1/2) F F_{y^D} B^D_ABC, contracted against the Berwald oracle.

    Uses F_{y^0} = phi_z and F_{y^i} = phi_s x^i + Omega u_i.
    """
    t = phi_table(spec, p, order=2, check_domain=False)
    bw = berwald if berwald is not None else berwald_oracle(spec, p)
    n = p.n
    phi = t.phi
    om = phi - t.s * t.partial(as_=1) - t.z * t.partial(az=1)
    f_val = p.u * phi
    fy = [t.partial(az=1)]
    fy += [t.partial(as_=1) * xi + om * (yi / p.u) for xi, yi in zip(p.xbar, p.ybar)]
    bfull = bw.full()
    m = n + 1
    out = np.zeros((m, m, m))
    for a, b, c in _sorted_triples(n):
        val = 0.5 * f_val * sum(fy[d] * bfull[d, a, b, c] for d in range(m))
        for perm in set(itertools.permutations((a, b, c))):
            out[perm] = val
    return LandsbergTensor.from_full(out)


# --- grid sweeps ------------------------------------------------------------------


def grid_tensor_maxima(spec: MetricSpec, grid, threads: int = 1) -> tuple[float, float]:
    """(berwald grid max, landsberg grid max) over canonical grid points."""
    from ._util import parallel_map
    from .metric import canonical_point

    def one(pt):
        b, l = curvature_pair(spec, canonical_point(*pt, n=spec.n))
        return b.max_abs, l.max_abs

    rows = parallel_map(one, grid.point_list(), threads)
    return max(r[0] for r in rows), max(r[1] for r in rows)


def berwald_grid_max(spec: MetricSpec, grid, threads: int = 1) -> float:
    return grid_tensor_maxima(spec, grid, threads)[0]


def landsberg_grid_max(spec: MetricSpec, grid, threads: int = 1) -> float:
    return grid_tensor_maxima(spec, grid, threads)[1]

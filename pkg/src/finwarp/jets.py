"""Truncated multivariate Taylor (jet) arithmetic.

A jet stores all Taylor coefficients of a smooth function at a point, up to a
total-degree truncation order, and supports the ring operations plus
composition with elementary functions.  Coefficients are Taylor-normalized:
the entry for multi-index k is (d^k f) / prod(k_i!).  Propagating jets through
a program therefore yields exact higher-order partial derivatives (up to
floating-point roundoff), which is the differentiation currency of the whole
package.  A finite-difference fallback (`fd_partial`) provides an independent
cross-check.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DivisionByZero,
    DomainError,
    OrderExceeded,
    StencilOutOfDomain,
    UnknownVariable,
)

__all__ = [
    "JetSpace",
    "Jet",
    "jet_space",
    "jet_const",
    "jet_var",
    "jet_apply",
    "extract_partial",
    "sub_jet",
    "fd_partial",
    "fd_third_one_sided",
]


def _enumerate_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All multi-indices with total degree <= order, graded-lexicographic."""
    by_degree: list[list[tuple[int, ...]]] = [[] for _ in range(order + 1)]

    def rec(prefix: tuple[int, ...], remaining: int, budget: int) -> None:
        if remaining == 0:
            by_degree[order - budget].append(prefix)
            return
        for k in range(budget + 1):
            rec(prefix + (k,), remaining - 1, budget - k)

    rec((), nvars, order)
    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        out.extend(sorted(by_degree[deg]))
    return out


class JetSpace:
    """A truncation context: ordered variable names and a max total degree.

    Spaces are interned by `jet_space`, so identity comparison identifies
    compatible jets.  The multiplication table and per-variable derivative
    maps are built lazily and cached on the space.
    """

    def __init__(self, variables: tuple[str, ...], order: int):
        if order < 1:
            raise ValueError("jet order must be >= 1")
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate variable names")
        self.variables = tuple(variables)
        self.order = int(order)
        self.indices = _enumerate_indices(len(variables), order)
        self.position = {idx: p for p, idx in enumerate(self.indices)}
        self.size = len(self.indices)
        self._mul_table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self._deriv_maps: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"JetSpace({self.variables}, order={self.order})"

    def var_position(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownVariable(f"variable {name!r} not in space {self.variables}") from None

    def mul_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._mul_table is None:
            degrees = [sum(idx) for idx in self.indices]
            ii, jj, kk = [], [], []
            for ipos, idx in enumerate(self.indices):
                di = degrees[ipos]
                for jpos, jdx in enumerate(self.indices):
                    if di + degrees[jpos] > self.order:
                        continue
                    ii.append(ipos)
                    jj.append(jpos)
                    kk.append(self.position[tuple(a + b for a, b in zip(idx, jdx))])
            self._mul_table = (
                np.asarray(ii, dtype=np.intp),
                np.asarray(jj, dtype=np.intp),
                np.asarray(kk, dtype=np.intp),
            )
        return self._mul_table

    def deriv_map(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(source positions, target positions in the order-1-lower space, factors)."""
        if name not in self._deriv_maps:
            v = self.var_position(name)
            lower = jet_space(self.variables, self.order - 1) if self.order > 1 else None
            src, dst, fac = [], [], []
            for pos, idx in enumerate(self.indices):
                if idx[v] == 0:
                    continue
                tgt = idx[:v] + (idx[v] - 1,) + idx[v + 1:]
                if lower is not None:
                    if sum(tgt) > lower.order:
                        continue
                    dst.append(lower.position[tgt])
                else:
                    if sum(tgt) > 0:
                        continue
                    dst.append(0)
                src.append(pos)
                fac.append(idx[v])
            self._deriv_maps[name] = (
                np.asarray(src, dtype=np.intp),
                np.asarray(dst, dtype=np.intp),
                np.asarray(fac, dtype=np.float64),
            )
        return self._deriv_maps[name]


_SPACES: dict[tuple[tuple[str, ...], int], JetSpace] = {}


def jet_space(variables: Sequence[str], order: int) -> JetSpace:
    key = (tuple(variables), int(order))
    sp = _SPACES.get(key)
    if sp is None:
        sp = JetSpace(*key)
        _SPACES[key] = sp
    return sp


class Jet:
    """Immutable truncated Taylor expansion over a `JetSpace`."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        c = np.asarray(coeffs, dtype=np.float64)
        if c.shape != (space.size,):
            raise ValueError(f"expected {space.size} coefficients, got {c.shape}")
        c.flags.writeable = False
        self.coeffs = c

    @property
    def value(self) -> float:
        """Value of the underlying function at the expansion point."""
        return float(self.coeffs[0])

    def __repr__(self) -> str:
        return f"Jet(order={self.space.order}, value={self.value!r})"

    # -- helpers -------------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        if order == self.space.order:
            return self
        if order > self.space.order:
            raise OrderExceeded("cannot extend a jet to higher order")
        target = jet_space(self.space.variables, order)
        return Jet(target, self.coeffs[: target.size].copy())

    def derivative(self, name: str) -> "Jet":
        """Partial derivative; the result is exact one order lower."""
        if self.space.order < 1:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        src, dst, fac = self.space.deriv_map(name)
        if self.space.order == 1:
            target = jet_space(self.space.variables, 1)
            out = np.zeros(target.size)
            np.add.at(out, dst, self.coeffs[src] * fac)
            # order-1 container for a value-only result: derivative coefficients
            # beyond degree 0 are unknown and explicitly zeroed
            out[1:] = 0.0
            return Jet(target, out)
        target = jet_space(self.space.variables, self.space.order - 1)
        out = np.zeros(target.size)
        out[dst] = self.coeffs[src] * fac
        return Jet(target, out)

    def nonconstant(self) -> "Jet":
        c = self.coeffs.copy()
        c[0] = 0.0
        return Jet(self.space, c)

    # -- ring operations -----------------------------------------------------

    def _align(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if self.space is other.space:
            return self, other
        if self.space.variables != other.space.variables:
            raise ValueError("jets over different variables")
        m = min(self.space.order, other.space.order)
        return self.truncate(m), other.truncate(m)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.space, a.coeffs + b.coeffs)
        c = self.coeffs.copy()
        c[0] += float(other)
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        return self.__add__(-other if isinstance(other, Jet) else -float(other))

    def __rsub__(self, other):
        return (-self).__add__(float(other))

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            ii, jj, kk = a.space.mul_table()
            out = np.bincount(kk, weights=a.coeffs[ii] * b.coeffs[jj], minlength=a.space.size)
            return Jet(a.space, out)
        return Jet(self.space, self.coeffs * float(other))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        b0 = self.value
        if b0 == 0.0:
            raise DivisionByZero("jet reciprocal with zero base value")
        coeffs = [(-1.0) ** m / b0 ** (m + 1) for m in range(self.space.order + 1)]
        return _compose(self, coeffs)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return a * b.reciprocal()
        d = float(other)
        if d == 0.0:
            raise DivisionByZero("jet divided by scalar zero")
        return Jet(self.space, self.coeffs / d)

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, p):
        if isinstance(p, int) or (isinstance(p, float) and p.is_integer()):
            return _int_pow(self, int(p))
        return jet_apply("pow", self, p=float(p))


def _int_pow(x: Jet, p: int) -> Jet:
    if p < 0:
        return _int_pow(x.reciprocal(), -p)
    result = jet_const(x.space, 1.0)
    base = x
    while p:
        if p & 1:
            result = result * base
        base = base * base if p > 1 else base
        p >>= 1
    return result


def jet_const(space: JetSpace, value: float) -> Jet:
    c = np.zeros(space.size)
    c[0] = float(value)
    return Jet(space, c)


def jet_var(space: JetSpace, name: str, base_value: float) -> Jet:
    v = space.var_position(name)
    unit = tuple(1 if i == v else 0 for i in range(len(space.variables)))
    c = np.zeros(space.size)
    c[0] = float(base_value)
    c[space.position[unit]] = 1.0
    return Jet(space, c)


def _compose(x: Jet, series: Sequence[float]) -> Jet:
    """Evaluate sum_m series[m] * (x - x0)^m by Horner in jet arithmetic."""
    delta = x.nonconstant()
    result = jet_const(x.space, series[-1])
    for m in range(len(series) - 2, -1, -1):
        result = result * delta + series[m]
    return result


def _binom(p: float, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= (p - i) / (i + 1)
    return out


def _univariate_series(tag: str, a: float, order: int, p: float | None) -> list[float]:
    """Taylor coefficients f^(m)(a)/m! of the elementary function at base a."""
    if tag == "exp":
        e = math.exp(a)
        return [e / math.factorial(m) for m in range(order + 1)]
    if tag == "log":
        if a <= 0.0:
            raise DomainError(f"log of non-positive base {a!r}")
        out = [math.log(a)]
        out += [(-1.0) ** (m - 1) / (m * a ** m) for m in range(1, order + 1)]
        return out
    if tag == "sqrt":
        if a <= 0.0:
            raise DomainError(f"sqrt of non-positive base {a!r}")
        return [_binom(0.5, m) * a ** (0.5 - m) for m in range(order + 1)]
    if tag == "pow":
        if p is None:
            raise ValueError("pow requires the exponent p")
        if a <= 0.0:
            raise DomainError(f"non-integer power of non-positive base {a!r}")
        return [_binom(p, m) * a ** (p - m) for m in range(order + 1)]
    if tag == "sin":
        return [math.sin(a + m * math.pi / 2) / math.factorial(m) for m in range(order + 1)]
    if tag == "cos":
        return [math.cos(a + m * math.pi / 2) / math.factorial(m) for m in range(order + 1)]
    if tag == "arctan":
        # d^m/dx^m arctan = (m-1)! cos^m(t) sin(m(t + pi/2)), t = arctan(a)
        t = math.atan(a)
        out = [t]
        for m in range(1, order + 1):
            out.append(math.cos(t) ** m * math.sin(m * (t + math.pi / 2)) / m)
        return out
    raise ValueError(f"unknown elementary function tag {tag!r}")


ELEMENTARY_FUNCTIONS = ("sqrt", "exp", "log", "arctan", "sin", "cos")


def jet_apply(tag: str, x: Jet, p: float | None = None) -> Jet:
    """Compose the univariate elementary function `tag` with a jet."""
    series = _univariate_series(tag, x.value, x.space.order, p)
    return _compose(x, series)


def _as_index(space: JetSpace, idx) -> tuple[int, ...]:
    """Accept {var: degree} mappings or degree tuples aligned with the space."""
    if isinstance(idx, Mapping):
        out = [0] * len(space.variables)
        for name, k in idx.items():
            out[space.var_position(name)] = int(k)
        return tuple(out)
    tup = tuple(int(k) for k in idx)
    if len(tup) != len(space.variables):
        raise ValueError("multi-index length does not match the space")
    return tup


def extract_partial(j: Jet, idx) -> float:
    """Partial derivative value: stored coefficient times the factorial product."""
    tup = _as_index(j.space, idx)
    if sum(tup) > j.space.order:
        raise OrderExceeded(f"index {tup} exceeds order {j.space.order}")
    fac = 1.0
    for k in tup:
        fac *= math.factorial(k)
    return float(j.coeffs[j.space.position[tup]]) * fac


def sub_jet(j: Jet, base: Mapping[str, int], space: JetSpace) -> Jet:
    """Jet of the partial derivative d^base f, expanded in `space`'s variables.

    `space.variables` must be a subset of `j.space.variables`; the remaining
    variables are frozen at the expansion point.
    """
    master = j.space
    base_full = [0] * len(master.variables)
    for name, k in base.items():
        base_full[master.var_position(name)] = int(k)
    sub_pos = [master.var_position(v) for v in space.variables]
    out = np.zeros(space.size)
    for mpos, midx in enumerate(space.indices):
        full = base_full.copy()
        for sp_axis, m in zip(sub_pos, midx):
            full[sp_axis] += m
        key = tuple(full)
        src = master.position.get(key)
        if src is None:
            raise OrderExceeded(f"index {key} exceeds master order {master.order}")
        fac = 1.0
        for sp_axis, m in zip(sub_pos, midx):
            b = base_full[sp_axis]
            if b:
                fac *= math.factorial(b + m) / math.factorial(m)
        for axis, b in enumerate(base_full):
            if b and axis not in sub_pos:
                fac *= math.factorial(b)
        out[mpos] = j.coeffs[src] * fac
    return Jet(space, out)


# --- finite differences -----------------------------------------------------

# centered stencils of O(h^2) accuracy, offset -> weight
_CENTRAL_STENCILS = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def _fd_once(f, point: Mapping[str, float], idx: Mapping[str, int], h: float) -> float:
    axes = [(name, k) for name, k in idx.items() if k > 0]
    for _, k in axes:
        if k not in _CENTRAL_STENCILS:
            raise ValueError(f"no centered stencil for derivative order {k}")
    total = 0.0
    scale = 1.0
    for _, k in axes:
        scale *= h ** k

    def rec(i: int, shift: dict, weight: float) -> float:
        if i == len(axes):
            pt = dict(point)
            for name, off in shift.items():
                pt[name] = pt[name] + off * h
            try:
                return weight * float(f(pt))
            except Exception as exc:  # noqa: BLE001 - any failure means the stencil left the domain
                raise StencilOutOfDomain(str(exc)) from exc
        name, k = axes[i]
        acc = 0.0
        for off, w in _CENTRAL_STENCILS[k]:
            acc += rec(i + 1, {**shift, name: off}, weight * w)
        return acc

    total = rec(0, {}, 1.0)
    return total / scale


def fd_partial(f: Callable[[Mapping[str, float]], float],
               point: Mapping[str, float],
               idx: Mapping[str, int],
               h: float = 1e-3) -> float:
    """Mixed partial derivative by centered differences with one Richardson step.

    `f` maps a {variable: value} dict to a float; `idx` gives the derivative
    order per variable.  The stencil is the tensor product of O(h^2) centered
    stencils, so the extrapolated value is O(h^4)-accurate.
    """
    if all(k == 0 for k in idx.values()):
        try:
            return float(f(dict(point)))
        except Exception as exc:  # noqa: BLE001
            raise StencilOutOfDomain(str(exc)) from exc
    d_h = _fd_once(f, point, idx, h)
    d_h2 = _fd_once(f, point, idx, h / 2.0)
    return (4.0 * d_h2 - d_h) / 3.0


# one-sided 6-point stencil for f''' at the anchor, O(h^3) accuracy
_ONE_SIDED_THIRD = (-17.0 / 4.0, 71.0 / 4.0, -59.0 / 2.0, 49.0 / 2.0, -41.0 / 4.0, 7.0 / 4.0)


def _third_one_sided_once(f, a: float, h: float, side: int) -> float:
    acc = 0.0
    for i, w in enumerate(_ONE_SIDED_THIRD):
        try:
            acc += w * float(f(a + side * i * h))
        except Exception as exc:  # noqa: BLE001
            raise StencilOutOfDomain(str(exc)) from exc
    return side * acc / h ** 3


def fd_third_one_sided(f: Callable[[float], float], a: float, side: int, h: float = 0.02) -> float:
    """One-sided third derivative at `a` from the `side` (+1 or -1) direction.

    Uses a 6-point O(h^3) stencil anchored at `a` plus one Richardson step;
    `f` only ever gets evaluated strictly on the chosen side (and at `a`).
    """
    if side not in (-1, 1):
        raise ValueError("side must be +1 or -1")
    d_h = _third_one_sided_once(f, a, h, side)
    d_h2 = _third_one_sided_once(f, a, h / 2.0, side)
    return (8.0 * d_h2 - d_h) / 7.0

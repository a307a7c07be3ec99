"""The explicit Landsberg family with non-vanishing Berwald curvature.

Coefficient data: k = k(x0) > 0 and g1, g2, g3 = g(x0, r) with

    Delta = g1*g3 - g2^2 > 0,    [g2/sqrt(Delta)]_r = 0,    [g2^2/(g1*g3)]_r = 0.

Two displayed normalizations of the metric function are supported:

* canonical-form (the default and the verified-Landsberg target)::

      phi = k * sqrt(zeta^2 + alpha^2) * exp(beta * arctan(zeta/alpha))
      zeta = z + g2/g1 = z + alpha*beta,  alpha = sqrt(Delta)/g1,  beta = g2/sqrt(Delta)

* intro-form, the radical-with-2*g3 display transcribed literally.  Completing
  the square shows its radical constant is 2*g3/g1 where the canonical form
  carries g3/g1, so the two variants are genuinely different functions; the
  `variant_consistency` report records which (if either) has vanishing
  Landsberg curvature rather than editing the formula.

The family is Berwald only under the extra degeneracy conditions
[g2/sqrt(Delta)]_{x0} = 0 and [g3/g2]_{x0} + 2*(k'/k)*(g3/g2) = 0.

The metric is not regular: along the ray ybar -> 0 the function
theta(t) = |t| * phi(x0, r, 1/|t|) is C^2 but not C^3, with one-sided third
derivatives  alpha^2*(1+beta^2)*k*exp(beta*pi/2) * (-/+ 4*alpha*beta)  at 0+/-.
`regularity_probe` measures both sides by one-sided finite differences and
compares against those limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from . import dsl, jets
from .curvature import grid_tensor_maxima
from .errors import DegenerateAlphaBeta, DomainError, NegativeDelta, ZeroG2
from .metric import Domain, GridSpec, MetricSpec

VARIANTS = ("canonical-form", "intro-form")

_DELTA = dsl.parse("G1*G3 - G2^2", ("G1", "G2", "G3"))
_ALPHA = dsl.parse("sqrt(G1*G3 - G2^2)/G1", ("G1", "G2", "G3"))
_BETA = dsl.parse("G2/sqrt(G1*G3 - G2^2)", ("G1", "G2", "G3"))
_CANONICAL = dsl.parse(
    "K * sqrt((z + MU)^2 + AL^2) * exp(BE * arctan((z + MU)/AL))",
    ("K", "MU", "AL", "BE"),
)
_INTRO = dsl.parse(
    "K * sqrt((G1*z^2 + 2*G2*z + 2*G3)/G1)"
    " * exp((G2/sqrt(G1*G3 - G2^2)) * arctan((G1*z + G2)/sqrt(G1*G3 - G2^2)))",
    ("K", "G1", "G2", "G3"),
)


def _check_coeff_vars(expr: dsl.Expression, allowed: set[str], what: str) -> None:
    extra = dsl.free_variables(expr) - allowed
    if extra:
        raise DomainError(f"{what} may only depend on {sorted(allowed)}, found {sorted(extra)}")


@dataclass(frozen=True)
class UnicornParams:
    """Coefficient functions of the family; g's in (x0, r), k in x0 only."""

    k: dsl.Expression
    g1: dsl.Expression
    g2: dsl.Expression
    g3: dsl.Expression
    variant: str = "canonical-form"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        _check_coeff_vars(self.k, {"x0"}, "k")
        for name, g in (("g1", self.g1), ("g2", self.g2), ("g3", self.g3)):
            _check_coeff_vars(g, {"x0", "r"}, name)

    def gsub(self) -> dict[str, dsl.Expression]:
        return {"G1": self.g1, "G2": self.g2, "G3": self.g3}

    @property
    def alpha(self) -> dsl.Expression:
        return dsl.substitute(_ALPHA, self.gsub())

    @property
    def beta(self) -> dsl.Expression:
        return dsl.substitute(_BETA, self.gsub())

    @property
    def delta(self) -> dsl.Expression:
        return dsl.substitute(_DELTA, self.gsub())

    def coeff_values(self, x0: float, r: float) -> tuple[float, float, float, float]:
        """(k, alpha, beta, Delta) evaluated at one base point."""
        env = {"x0": x0, "r": r}
        return (
            dsl.eval_value(self.k, env, self.params),
            dsl.eval_value(self.alpha, env, self.params),
            dsl.eval_value(self.beta, env, self.params),
            dsl.eval_value(self.delta, env, self.params),
        )


def unicorn_params(k: str | dsl.Expression = "1",
                   g1: str | dsl.Expression | None = None,
                   g2: str | dsl.Expression | None = None,
                   g3: str | dsl.Expression | None = None,
                   alpha: str | dsl.Expression | None = None,
                   beta: str | dsl.Expression | None = None,
                   variant: str = "canonical-form",
                   params: Mapping[str, float] | None = None) -> UnicornParams:
    """Build params from (g1, g2, g3) or from (alpha, beta).

    Given alpha, beta the coefficients are normalized to g1 = 1, g2 = alpha*beta,
    g3 = alpha^2*(1+beta^2), which reproduces exactly that (alpha, beta) pair.
    """
    params = dict(params or {})

    def as_expr(v):
        return dsl.parse(v, params) if isinstance(v, str) else v

    k = as_expr(k)
    if alpha is not None or beta is not None:
        if g1 is not None or g2 is not None or g3 is not None:
            raise ValueError("give either (g1, g2, g3) or (alpha, beta), not both")
        if alpha is None or beta is None:
            raise ValueError("alpha and beta must be given together")
        al, be = as_expr(alpha), as_expr(beta)
        g1 = dsl.Num(1.0)
        g2 = dsl.BinOp("*", al, be)
        g3 = dsl.BinOp("*", dsl.BinOp("^", al, dsl.Num(2.0)),
                       dsl.BinOp("+", dsl.Num(1.0), dsl.BinOp("^", be, dsl.Num(2.0))))
    else:
        if g1 is None or g2 is None or g3 is None:
            raise ValueError("need all of g1, g2, g3 (or alpha and beta)")
        g1, g2, g3 = as_expr(g1), as_expr(g2), as_expr(g3)
    return UnicornParams(k=k, g1=g1, g2=g2, g3=g3, variant=variant, params=params)


def derived_instance(k: str = "exp(x0)", variant: str = "canonical-form") -> UnicornParams:
    """The worked example: g1 = e^(2r), g2 = e^r/sqrt(2), g3 = 1.

    Then Delta = e^(2r)/2, beta = g2/sqrt(Delta) = 1 and alpha = e^(-r)/sqrt(2);
    with k = exp(x0) the Berwald degeneracy condition fails (residual
    2*sqrt(2)*e^(-r)) while the Landsberg conditions hold identically.
    """
    return unicorn_params(k=k, g1="exp(2*r)", g2="exp(r)/sqrt(2)", g3="1", variant=variant)


def unicorn_phi(**kwargs) -> dsl.Expression:
    """Expression-level entry point used by `dsl.builtin("unicorn", ...)`."""
    return build_phi(unicorn_params(**kwargs))


def build_phi(params: UnicornParams) -> dsl.Expression:
    gsub = params.gsub()
    if params.variant == "canonical-form":
        mu = dsl.BinOp("/", params.g2, params.g1)  # g2/g1 = alpha*beta
        return dsl.substitute(_CANONICAL, {"K": params.k, "MU": mu,
                                           "AL": params.alpha, "BE": params.beta})
    return dsl.substitute(_INTRO, {"K": params.k, **gsub})


def _coeff_grid(domain: Domain, count: int = 5) -> list[tuple[float, float]]:
    gs = GridSpec(domain, (count, count, 1, 1))
    return gs.xr_pairs()


def build_unicorn(params: UnicornParams, n: int = 3, domain: Domain | None = None,
                  name: str | None = None) -> MetricSpec:
    """MetricSpec for the chosen variant, after checking the family invariants
    (Delta > 0, g2 != 0, alpha > 0) numerically over the domain."""
    domain = domain or Domain()
    env_pairs = _coeff_grid(domain)
    for x0, r in env_pairs:
        env = {"x0": x0, "r": r}
        delta = dsl.eval_value(params.delta, env, params.params)
        if not delta > 0.0:
            raise NegativeDelta(f"Delta = {delta!r} at (x0, r) = ({x0!r}, {r!r})")
        g2v = dsl.eval_value(params.g2, env, params.params)
        if g2v == 0.0:
            raise ZeroG2(f"g2 = 0 at (x0, r) = ({x0!r}, {r!r})")
        if params.variant == "canonical-form":
            al = dsl.eval_value(params.alpha, env, params.params)
            if not al > 0.0:
                raise DegenerateAlphaBeta(f"alpha = {al!r} at (x0, r) = ({x0!r}, {r!r})")
    phi = build_phi(params)
    label = name or f"unicorn[{params.variant}]"
    return MetricSpec(label, n, phi, dict(params.params), domain)


# --- coefficient conditions -----------------------------------------------------


@dataclass
class ConditionReport:
    """Residual maxima of the Landsberg and Berwald-degeneracy conditions."""

    landsberg_r_beta: float      # [g2/sqrt(Delta)]_r
    landsberg_r_ratio: float     # [g2^2/(g1*g3)]_r
    berwald_x0_beta: float       # [g2/sqrt(Delta)]_{x0}
    berwald_k_ratio: float       # [g3/g2]_{x0} + 2*(k'/k)*(g3/g2)
    min_delta: float
    min_abs_g2: float
    grid_points: int

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("landsberg_r_beta", self.landsberg_r_beta),
            ("landsberg_r_ratio", self.landsberg_r_ratio),
            ("berwald_x0_beta", self.berwald_x0_beta),
            ("berwald_k_ratio", self.berwald_k_ratio),
        ]

    def landsberg_ok(self, tol: float = 1e-9) -> bool:
        return (self.landsberg_r_beta <= tol and self.landsberg_r_ratio <= tol
                and self.min_delta > 0.0)

    def berwald_ok(self, tol: float = 1e-9) -> bool:
        return self.berwald_x0_beta <= tol and self.berwald_k_ratio <= tol


def check_conditions(params: UnicornParams,
                     grid: list[tuple[float, float]] | None = None,
                     domain: Domain | None = None) -> ConditionReport:
    """Evaluate the condition residuals with (x0, r)-jets on the coefficients."""
    pairs = grid if grid is not None else _coeff_grid(domain or Domain())
    space = jets.jet_space(("x0", "r"), 1)
    beta_expr, delta_expr = params.beta, params.delta
    ratio_expr = dsl.substitute(dsl.parse("G2^2/(G1*G3)", ("G1", "G2", "G3")), params.gsub())
    g3_over_g2 = dsl.BinOp("/", params.g3, params.g2)

    worst = [0.0, 0.0, 0.0, 0.0]
    min_delta = math.inf
    min_g2 = math.inf
    for x0, r in pairs:
        env = {"x0": jets.jet_var(space, "x0", x0), "r": jets.jet_var(space, "r", r),
               "s": jets.jet_const(space, 0.0), "z": jets.jet_const(space, 0.0)}
        beta_j = dsl.eval_jet(beta_expr, env, params.params)
        ratio_j = dsl.eval_jet(ratio_expr, env, params.params)
        g32_j = dsl.eval_jet(g3_over_g2, env, params.params)
        k_j = dsl.eval_jet(params.k, env, params.params)
        kp_over_k = jets.extract_partial(k_j, {"x0": 1}) / k_j.value
        worst[0] = max(worst[0], abs(jets.extract_partial(beta_j, {"r": 1})))
        worst[1] = max(worst[1], abs(jets.extract_partial(ratio_j, {"r": 1})))
        worst[2] = max(worst[2], abs(jets.extract_partial(beta_j, {"x0": 1})))
        worst[3] = max(worst[3], abs(jets.extract_partial(g32_j, {"x0": 1})
                                     + 2.0 * kp_over_k * g32_j.value))
        min_delta = min(min_delta, dsl.eval_jet(delta_expr, env, params.params).value)
        min_g2 = min(min_g2, abs(dsl.eval_jet(params.g2, env, params.params).value))
    return ConditionReport(
        landsberg_r_beta=worst[0], landsberg_r_ratio=worst[1],
        berwald_x0_beta=worst[2], berwald_k_ratio=worst[3],
        min_delta=min_delta, min_abs_g2=min_g2, grid_points=len(pairs),
    )


# --- regularity probe -------------------------------------------------------------


@dataclass
class RegularityProbeResult:
    theta_ppp_plus: float
    theta_ppp_minus: float
    predicted_plus: float
    predicted_minus: float
    theta_at_zero: float
    predicted_at_zero: float
    jump: float
    alpha: float
    beta: float
    k: float

    @property
    def predicted_jump(self) -> float:
        return self.predicted_plus - self.predicted_minus


def regularity_probe(params: UnicornParams, x0: float, r: float,
                     h: float = 0.01) -> RegularityProbeResult:
    """One-sided third derivatives of theta(t) = |t|*phi(x0, r, 1/|t|) at 0,
    measured by one-sided finite differences, against the closed-form limits."""
    k, alpha, beta, _ = params.coeff_values(x0, r)
    if alpha == 0.0 or not math.isfinite(alpha):
        raise DegenerateAlphaBeta(f"alpha = {alpha!r} at (x0, r) = ({x0!r}, {r!r})")
    phi = build_phi(UnicornParams(params.k, params.g1, params.g2, params.g3,
                                  "canonical-form", params.params))
    theta0 = k * math.exp(beta * math.pi / 2.0)

    def theta(t: float) -> float:
        if t == 0.0:
            return theta0
        env = {"x0": x0, "r": r, "s": 0.0, "z": 1.0 / abs(t)}
        return abs(t) * dsl.eval_value(phi, env, params.params)

    plus = jets.fd_third_one_sided(theta, 0.0, +1, h)
    minus = jets.fd_third_one_sided(theta, 0.0, -1, h)
    base = alpha * alpha * (1.0 + beta * beta) * k * math.exp(beta * math.pi / 2.0)
    predicted_plus = base * (-4.0 * alpha * beta)
    predicted_minus = base * (4.0 * alpha * beta)
    small = 1e-9
    return RegularityProbeResult(
        theta_ppp_plus=plus, theta_ppp_minus=minus,
        predicted_plus=predicted_plus, predicted_minus=predicted_minus,
        theta_at_zero=theta(small) if beta >= 0 else theta(-small),
        predicted_at_zero=theta0,
        jump=plus - minus, alpha=alpha, beta=beta, k=k,
    )


# --- variant cross-check ------------------------------------------------------------


@dataclass
class VariantReport:
    rows: dict[str, dict[str, float]]
    radical_constant_canonical: str
    radical_constant_intro: str

    def vanishing_variants(self, tol: float = 1e-7) -> list[str]:
        return [name for name, row in self.rows.items() if row["landsberg_max"] <= tol]


def variant_consistency(params: UnicornParams, grid: GridSpec | None = None,
                        n: int = 3, threads: int = 1) -> VariantReport:
    """Landsberg/Berwald grid maxima for both displayed normalizations.

    The two variants differ in the constant term under the radical
    (g3/g1 for canonical-form vs 2*g3/g1 for intro-form); the report shows
    which normalization actually has vanishing Landsberg curvature.
    """
    grid = grid or GridSpec()
    rows = {}
    for variant in VARIANTS:
        pv = UnicornParams(params.k, params.g1, params.g2, params.g3, variant, params.params)
        spec = build_unicorn(pv, n=n, domain=grid.domain)
        bmax, lmax = grid_tensor_maxima(spec, grid, threads=threads)
        rows[variant] = {"berwald_max": bmax, "landsberg_max": lmax}
    return VariantReport(
        rows=rows,
        radical_constant_canonical="g3/g1",
        radical_constant_intro="2*g3/g1",
    )

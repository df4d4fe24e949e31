"""Pluggable variational models: integrand j(s,t), nonlinearity F(|x|,s),
constraint G(s), and the growth conditions they must satisfy as runnable audits.

A model bundles closed-form evaluators together with the envelope functions
that make the growth sandwich checkable numerically instead of assumed.
Presets cover the pure p-Dirichlet case, a genuinely quasi-linear integrand,
and a 3D eigenvalue benchmark with a closed-form oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .grid import CellField, GridDomain, GridFunction, gradient_magnitude


class ModelError(ValueError):
    """Raised for invalid model parameters or inadmissible preset names."""


def sobolev_exponent(p: float, N: int) -> float:
    """Critical exponent p* = Np/(N-p); requires 1 < p < N."""
    if not (1 < p < N):
        raise ModelError(f"need 1 < p < N, got p={p}, N={N}")
    return N * p / (N - p)


def sigma_window(p: float, N: int) -> tuple:
    """Open interval (p, p + p^2/N) of exponents sigma for which the power-law
    model j=|t|^p, G=|s|^p, F=|s|^sigma has a finite infimum."""
    if not (1 < p < N):
        raise ModelError(f"need 1 < p < N, got p={p}, N={N}")
    return (p, p + p * p / N)


@dataclass(frozen=True)
class IntegrandJ:
    """Quasi-linear integrand j(s,t) with partial derivatives and envelopes.

    t >= 0 is the gradient magnitude slot.  alpha0, alpha, beta, gamma realize
    the growth sandwich alpha0 t^p <= j <= alpha(|s|) t^p, |j_s| <= beta(|s|) t^p,
    |j_t| <= gamma(|s|) t^(p-1).
    """

    j: Callable
    j_s: Callable
    j_t: Callable
    j_st: Callable
    p: float
    alpha0: float
    alpha: Callable
    beta: Callable
    gamma: Callable

    def j_field(self, u: GridFunction) -> CellField:
        t = gradient_magnitude(u).values
        return CellField(u.domain, np.asarray(self.j(u.values, t), dtype=np.float64))


@dataclass(frozen=True)
class NonlinearityF:
    """Radially weighted nonlinearity F(r,s) with f = dF/ds and F(r,0) = 0."""

    f: Callable
    F: Callable
    a: Callable           # radial envelope in |f(r,s)| <= a(r) + C |s|^(p*-1)
    C: float

    def F_field(self, u: GridFunction) -> CellField:
        r = np.sqrt(u.domain.radius_sq)
        return CellField(u.domain, np.asarray(self.F(r, u.values), dtype=np.float64))

    def f_values(self, u: GridFunction) -> np.ndarray:
        r = np.sqrt(u.domain.radius_sq)
        return np.asarray(self.f(r, u.values), dtype=np.float64)


@dataclass(frozen=True)
class ConstraintG:
    """Constraint density G(s) with g = G' and G(0) = 0.

    power is set when G(s) = |s|^power, enabling the closed-form rescaling
    projection onto the constraint manifold.
    """

    g: Callable
    G: Callable
    C: float
    power: Optional[float] = None

    def G_field(self, u: GridFunction) -> CellField:
        return CellField(u.domain, np.asarray(self.G(u.values), dtype=np.float64))

    def g_values(self, u: GridFunction) -> np.ndarray:
        return np.asarray(self.g(u.values), dtype=np.float64)


@dataclass(frozen=True)
class VariationalModel:
    """Bundle of dimension, domain defaults and the three model ingredients."""

    name: str
    dim: int
    integrand: IntegrandJ
    nonlinearity: NonlinearityF
    constraint: ConstraintG
    domain_defaults: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.integrand.p
        if not (1 < p < self.dim):
            raise ModelError(f"need 1 < p < N for p* = Np/(N-p); got p={p}, N={self.dim}")

    @property
    def p(self) -> float:
        return self.integrand.p

    @property
    def sobolev(self) -> float:
        return sobolev_exponent(self.p, self.dim)

    def default_domain(self, h: Optional[float] = None) -> GridDomain:
        dd = dict(self.domain_defaults)
        if h is not None:
            dd["h"] = h
        h = dd["h"]
        R = dd.get("R")
        if dd.get("shape", "ball") == "ball":
            # one padding cell between the ball and the box keeps every
            # zero-extension trace stencil inside the stored lattice
            L = dd.get("L", R + h)
            return GridDomain(dim=self.dim, h=h, half_extent=L, shape="ball", radius=R)
        return GridDomain(dim=self.dim, h=h, half_extent=dd["L"], shape="box")


def _plaplace_integrand(p: float) -> IntegrandJ:
    return IntegrandJ(
        j=lambda s, t: t ** p,
        j_s=lambda s, t: np.zeros_like(np.broadcast_arrays(s, t)[0], dtype=float),
        j_t=lambda s, t: p * t ** (p - 1.0),
        j_st=lambda s, t: np.zeros_like(np.broadcast_arrays(s, t)[0], dtype=float),
        p=p, alpha0=1.0,
        alpha=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        beta=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        gamma=lambda s: np.full_like(np.asarray(s, dtype=float), p),
    )


def _quasilinear_integrand(p: float) -> IntegrandJ:
    # coefficient c(s) = 1 + s^2/(1+s^2) ranges over [1, 2); c'(s) = 2s/(1+s^2)^2
    def c(s):
        s = np.asarray(s, dtype=float)
        return 1.0 + s * s / (1.0 + s * s)

    def cp(s):
        s = np.asarray(s, dtype=float)
        return 2.0 * s / (1.0 + s * s) ** 2

    return IntegrandJ(
        j=lambda s, t: c(s) * t ** p,
        j_s=lambda s, t: cp(s) * t ** p,
        j_t=lambda s, t: c(s) * p * t ** (p - 1.0),
        j_st=lambda s, t: cp(s) * p * t ** (p - 1.0),
        p=p, alpha0=1.0,
        alpha=lambda s: np.full_like(np.asarray(s, dtype=float), 2.0),
        # max of |c'| is 9 sqrt(3)/8 / ~... attained at s = 1/sqrt(3); 0.65 covers it
        beta=lambda s: np.full_like(np.asarray(s, dtype=float), 0.65),
        gamma=lambda s: np.full_like(np.asarray(s, dtype=float), 2.0 * p),
    )


def _power_nonlinearity(sigma: float) -> NonlinearityF:
    # F(r,s) = exp(-r) * max(s,0)^sigma ; f = sigma exp(-r) max(s,0)^(sigma-1)
    def F(r, s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.exp(-np.asarray(r, dtype=float)) * sp ** sigma

    def f(r, s):
        sp = np.maximum(np.asarray(s, dtype=float), 0.0)
        return sigma * np.exp(-np.asarray(r, dtype=float)) * sp ** (sigma - 1.0)

    return NonlinearityF(f=f, F=F, a=lambda r: sigma * np.exp(-np.asarray(r, dtype=float)),
                         C=sigma)


def _zero_nonlinearity() -> NonlinearityF:
    def zed(r, s):
        return np.zeros_like(np.broadcast_arrays(r, s)[0], dtype=float)

    return NonlinearityF(f=zed, F=zed, a=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                         C=0.0)


def _power_constraint(p: float) -> ConstraintG:
    return ConstraintG(
        g=lambda s: p * np.abs(s) ** (p - 1.0) * np.sign(s),
        G=lambda s: np.abs(s) ** p,
        C=p, power=p,
    )


def _make_plaplace(p: float = 1.5, sigma: float = 2.0) -> VariationalModel:
    return VariationalModel(
        name="plaplace", dim=2,
        integrand=_plaplace_integrand(p),
        nonlinearity=_power_nonlinearity(sigma),
        constraint=_power_constraint(p),
        domain_defaults={"shape": "ball", "R": 3.0, "h": 3.0 / 32.0},
    )


def _make_quasilinear(p: float = 1.5, sigma: float = 2.0) -> VariationalModel:
    base = _make_plaplace(p=p, sigma=sigma)
    return replace(base, name="quasilinear", integrand=_quasilinear_integrand(p))


def _make_eigen3d(p: float = 2.0, sigma: float = 0.0) -> VariationalModel:
    if p != 2.0 or sigma not in (0.0, None):
        raise ModelError("eigen3d is the fixed quadratic benchmark; p and sigma are pinned")
    return VariationalModel(
        name="eigen3d", dim=3,
        integrand=_plaplace_integrand(2.0),
        nonlinearity=_zero_nonlinearity(),
        constraint=_power_constraint(2.0),
        domain_defaults={"shape": "ball", "R": 1.0, "h": 1.0 / 12.0},
    )


_PRESETS = {
    "plaplace": _make_plaplace,
    "quasilinear": _make_quasilinear,
    "eigen3d": _make_eigen3d,
}


def preset(name: str, p: Optional[float] = None,
           sigma: Optional[float] = None) -> VariationalModel:
    """Return a fresh preset model; raises ModelError for unknown names.

    p and sigma override the power-family exponents where that makes sense
    (the nonlinearity exponent should sit inside sigma_window(p, N) for the
    minimization to stay bounded below).
    """
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise ModelError(f"unknown preset {name!r}; known: {sorted(_PRESETS)}") from None
    kwargs = {}
    if p is not None:
        kwargs["p"] = float(p)
    if sigma is not None:
        kwargs["sigma"] = float(sigma)
    try:
        return builder(**kwargs)
    except TypeError as exc:
        raise ModelError(f"preset {name!r} does not accept {sorted(kwargs)}: {exc}") from exc


def register_preset(name: str, builder: Callable) -> None:
    """Register a user-supplied model builder under `name`."""
    _PRESETS[name] = builder


# ---------------------------------------------------------------------------
# growth-condition audit


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "margin": self.margin, "detail": self.detail}


@dataclass(frozen=True)
class AuditReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _check(name: str, margins: np.ndarray, detail: str = "") -> ConditionCheck:
    margins = np.asarray(margins, dtype=float)
    worst = float(margins.min()) if margins.size else 0.0
    scale = float(np.abs(margins).max()) if margins.size else 1.0
    tol = 1e-10 * max(1.0, scale)
    return ConditionCheck(name=name, passed=worst >= -tol, margin=worst, detail=detail)


def validate_growth(model: VariationalModel, s_samples=None, t_samples=None,
                    r_samples=None) -> AuditReport:
    """Audit the growth conditions on sample grids; failures carry margins.

    Checks, in order: j(.,0)=0; strict convexity and monotonicity of t -> j;
    the growth sandwich on j; the j_s and j_t envelopes; the f growth bound and
    its radial monotonicity; the g growth bound; F(r,0)=0 and G(0)=0.
    """
    if s_samples is None:
        s_samples = np.linspace(0.0, 3.0, 31)
    if t_samples is None:
        t_samples = np.linspace(0.0, 3.0, 31)
    s_samples = np.asarray(s_samples, dtype=float)
    t_samples = np.asarray(t_samples, dtype=float)
    if s_samples.size == 0 or t_samples.size == 0:
        raise ModelError("sample sets must be nonempty")
    if r_samples is None:
        dd = model.domain_defaults
        reach = dd.get("R", dd.get("L", 1.0)) * np.sqrt(model.dim)
        r_samples = np.linspace(0.0, reach, 17)
    r_samples = np.asarray(r_samples, dtype=float)

    ig, nf, cg = model.integrand, model.nonlinearity, model.constraint
    p = ig.p
    pstar = model.sobolev
    S, T = np.meshgrid(s_samples, t_samples, indexing="ij")
    checks = []

    checks.append(_check("j(.,0)=0", -np.abs(ig.j(s_samples, np.zeros_like(s_samples)))))

    # convexity via second differences needs a uniform t grid
    tq = np.linspace(0.0, float(t_samples.max()) or 1.0, 64)
    Jq = np.asarray(ig.j(s_samples[:, None], tq[None, :]), dtype=float)
    d1 = np.diff(Jq, axis=1)
    d2 = np.diff(Jq, 2, axis=1)
    checks.append(_check("(1.3) t->j strictly convex", d2.ravel(),
                         "second differences in t"))
    checks.append(_check("(1.3) t->j increasing", d1.ravel(),
                         "first differences in t"))

    Jv = np.asarray(ig.j(S, T), dtype=float)
    Tp = T ** p
    checks.append(_check("(1.4) alpha0 t^p <= j", (Jv - ig.alpha0 * Tp).ravel()))
    checks.append(_check("(1.4) j <= alpha(|s|) t^p",
                         (np.asarray(ig.alpha(np.abs(S))) * Tp - Jv).ravel()))
    checks.append(_check("(1.5) |j_s| <= beta(|s|) t^p",
                         (np.asarray(ig.beta(np.abs(S))) * Tp
                          - np.abs(ig.j_s(S, T))).ravel()))
    with np.errstate(divide="ignore", invalid="ignore"):
        tpm1 = np.where(T > 0, T ** (p - 1.0), 0.0)
    checks.append(_check("(1.6) |j_t| <= gamma(|s|) t^(p-1)",
                         (np.asarray(ig.gamma(np.abs(S))) * tpm1
                          - np.abs(np.where(T > 0, ig.j_t(S, T), 0.0))).ravel()))

    Rg, Sg = np.meshgrid(r_samples, s_samples, indexing="ij")
    fv = np.asarray(nf.f(Rg, Sg), dtype=float)
    bound_f = np.asarray(nf.a(Rg), dtype=float) + nf.C * np.abs(Sg) ** (pstar - 1.0)
    checks.append(_check("(1.7) |f| <= a(r) + C|s|^(p*-1)", (bound_f - np.abs(fv)).ravel()))

    r_sorted = np.sort(r_samples)
    f_sorted = np.asarray(nf.f(r_sorted[:, None], s_samples[None, :]), dtype=float)
    checks.append(_check("(1.8) f nonincreasing in r", (-np.diff(f_sorted, axis=0)).ravel(),
                         "f(r1,s) - f(r2,s) for consecutive r1 <= r2, s >= 0"))

    gv = np.asarray(cg.g(s_samples), dtype=float)
    bound_g = cg.C * (np.abs(s_samples) ** (p - 1.0) + np.abs(s_samples) ** (pstar - 1.0))
    checks.append(_check("(1.9) |g| <= C(|s|^(p-1)+|s|^(p*-1))", bound_g - np.abs(gv)))

    checks.append(_check("F(r,0)=0", -np.abs(np.asarray(
        nf.F(r_samples, np.zeros_like(r_samples)), dtype=float))))
    checks.append(_check("G(0)=0", np.asarray([-abs(float(np.asarray(cg.G(0.0))))])))

    return AuditReport(checks=tuple(checks))


def feasible_start(model: VariationalModel, s0: float, domain: GridDomain,
                   center=None) -> GridFunction:
    """Plateau of height s0 with a linear skirt, scaled to satisfy the constraint.

    The plateau radius is found by scalar bisection so that the constraint
    integral equals 1 to 1e-10.  `center` places the bump off the origin.
    """
    G0 = float(np.asarray(model.constraint.G(s0)))
    if not (G0 > 0):
        raise ModelError(f"need G(s0) > 0, got G({s0}) = {G0}")
    if center is None:
        center = (0.0,) * domain.dim
    center = np.asarray(center, dtype=float)
    dist = np.sqrt(sum((c - cc) ** 2 for c, cc in zip(domain.centers, center)))
    reach = domain.radius if domain.shape == "ball" else domain.half_extent
    rho_max = reach - float(np.sqrt(np.sum(center ** 2))) - domain.h
    if rho_max <= domain.h:
        raise ModelError("domain too small for a feasible plateau at this center")
    # skirt two cells wide, narrowed on very coarse grids so the plateau fits
    skirt = min(2.0 * domain.h, 0.5 * rho_max)

    hN = domain.h ** domain.dim
    mask = domain.mask

    def wval(rho):
        prof = np.clip((rho - dist) / skirt, 0.0, 1.0)
        vals = s0 * prof
        vals = np.where(mask, vals, 0.0)
        return float(hN * np.sum(np.asarray(model.constraint.G(vals)))), vals

    w_hi, _ = wval(rho_max)
    if w_hi < 1.0:
        raise ModelError(
            f"domain too small: plateau of height {s0} reaches at most "
            f"constraint integral {w_hi:.6g} < 1")
    lo, hi = 0.0, rho_max
    vals = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        w_mid, vals = wval(mid)
        if abs(w_mid - 1.0) <= 1e-10:
            break
        if w_mid < 1.0:
            lo = mid
        else:
            hi = mid
    else:
        raise ModelError("feasible-start bisection failed to reach 1e-10")
    return GridFunction(domain, vals, nonneg=True)

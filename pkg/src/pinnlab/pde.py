"""Parametrized PDE family, boundary/forcing sets, and PINN loss assembly.

The operator is u_t - L*u_xx + N*u*u_x - F(t): heat equation at N=0, a forced
Burgers-type equation at N=1.  Boundary families fix the initial profile
u0(x) and the forcing F(t); the spatial boundary values are the constants
u0(x_lo), u0(x_hi) over the whole time interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet2, Tape
from .errors import ConfigurationError, StructuralError

PAPER_L_VALUES = (0.01, 0.03, 0.1, 0.3, 1.0)
PAPER_N_VALUES = (0.0, 1.0)


@dataclass(frozen=True)
class Domain:
    t_max: float = 1.0
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if self.t_max <= 0 or self.x_lo >= self.x_hi:
            raise ConfigurationError("need t_max > 0 and x_lo < x_hi")


@dataclass(frozen=True)
class BoundaryFamily:
    """One of the closed-form initial-profile / forcing pairs."""

    name: str  # "xsin" | "poly" | "xsinc"
    c: float | None = None

    def __post_init__(self):
        if self.name not in ("xsin", "poly", "xsinc"):
            raise ConfigurationError(f"unknown boundary family {self.name!r}")
        if self.name == "xsinc" and self.c is None:
            raise ConfigurationError("family 'xsinc' needs its frequency c")

    def initial_condition(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.name == "xsin":
            return np.sin(3.0 * np.pi * x) * x
        if self.name == "poly":
            return 50.0 * x * (0.3 - x) * (0.6 - x) * (1.0 - x)
        return np.sin(self.c * np.pi * x) * x

    def forcing(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.name == "xsin":
            return np.sin(4.0 * np.pi * t)
        if self.name == "poly":
            return 15.0 * t * (0.4 - t) * (1.0 - t)
        return np.sin(self.c * np.pi * t)

    def boundary_values(self, domain: Domain) -> tuple[float, float]:
        """Constant wall values u(t, x_lo), u(t, x_hi)."""
        return (float(self.initial_condition(domain.x_lo)),
                float(self.initial_condition(domain.x_hi)))


def family_from_config(cfg: dict) -> BoundaryFamily:
    return BoundaryFamily(cfg["family"], cfg.get("c"))


@dataclass(frozen=True)
class PdeProblem:
    """One cell of the experiment matrix."""

    lin: float  # L, scale of the diffusion term
    nonlin: float  # N, 0.0 or 1.0 in the paper matrix
    family: BoundaryFamily
    domain: Domain = field(default_factory=Domain)

    def __post_init__(self):
        if self.lin <= 0:
            raise ConfigurationError("linear-term scale L must be positive")

    @property
    def in_paper_matrix(self) -> bool:
        return self.nonlin in PAPER_N_VALUES

    def label(self) -> str:
        fam = self.family.name if self.family.c is None else f"{self.family.name}{self.family.c:g}"
        return f"L{self.lin:g}_N{self.nonlin:g}_{fam}"


@dataclass
class LossBreakdown:
    l_pde: float
    l_t: float
    l_x: float

    @property
    def l_bounds(self) -> float:
        return self.l_t + self.l_x

    def weighted(self, w_bounds: float, w_pde: float) -> float:
        return weighted_loss(self, w_bounds, w_pde)


def residual(u: Jet2, problem: PdeProblem, t):
    """PDE residual u_t - L*u_xx + N*u*u_x - F(t) evaluated from a jet."""
    f = problem.family.forcing(t)
    return (u.dt - problem.lin * u.dxx + problem.nonlin * u.v * u.dx - f)


def weighted_loss(breakdown: LossBreakdown, w_bounds: float, w_pde: float) -> float:
    if w_bounds <= 0 or w_pde <= 0:
        raise ConfigurationError("loss weights must be positive")
    return w_bounds * breakdown.l_bounds + w_pde * breakdown.l_pde


def pde_term_on_tape(tape: Tape, model, problem: PdeProblem, sets):
    """Record L_pde (full jet path over the interior points)."""
    from .networks import model_on_tape  # local import to avoid a cycle

    if sets.interior.shape[0] == 0:
        raise StructuralError("collocation sets must be non-empty")
    ti, xi = sets.interior[:, 0], sets.interior[:, 1]
    u_int = model_on_tape(tape, model, ti, xi, with_jets=True)
    r = tape.pde_residual(u_int, problem.lin, problem.nonlin,
                          problem.family.forcing(ti))
    return tape.mean_sq(r)


def bounds_terms_on_tape(tape: Tape, model, problem: PdeProblem, sets):
    """Record (L_t, L_x); both data-fit sets share one value-only network pass."""
    from .networks import model_on_tape

    n0 = sets.initial.shape[0]
    nb = sets.boundary.shape[0]
    if n0 == 0 or nb == 0:
        raise StructuralError("collocation sets must be non-empty")
    ts = np.concatenate([sets.initial[:, 0], sets.boundary[:, 0]])
    xs = np.concatenate([sets.initial[:, 1], sets.boundary[:, 1]])
    u = model_on_tape(tape, model, ts, xs, with_jets=False)
    l_t = tape.mse_to(tape.cols(u, 0, n0),
                      problem.family.initial_condition(sets.initial[:, 1]))
    lo, hi = problem.family.boundary_values(problem.domain)
    xb = sets.boundary[:, 1]
    targets = np.where(np.isclose(xb, problem.domain.x_lo), lo, hi)
    l_x = tape.mse_to(tape.cols(u, n0, n0 + nb), targets)
    return l_t, l_x


def loss_parts_on_tape(tape: Tape, model, problem: PdeProblem, sets):
    """Record L_pde, L_t, L_x for one collocation set triple.

    Interior points get the full jet evaluation, initial and boundary points
    the value-only path.
    """
    l_pde = pde_term_on_tape(tape, model, problem, sets)
    l_t, l_x = bounds_terms_on_tape(tape, model, problem, sets)
    return l_pde, l_t, l_x


def weighted_loss_on_tape(tape: Tape, model, problem: PdeProblem, sets,
                          w_bounds: float, w_pde: float):
    """Total weighted loss node plus the detached breakdown values."""
    if w_bounds <= 0 or w_pde <= 0:
        raise ConfigurationError("loss weights must be positive")
    l_pde, l_t, l_x = loss_parts_on_tape(tape, model, problem, sets)
    total = tape.wsum([l_t, l_x, l_pde], [w_bounds, w_bounds, w_pde])
    breakdown = LossBreakdown(l_pde.value(), l_t.value(), l_x.value())
    return total, breakdown


def loss_terms(model, problem: PdeProblem, sets) -> LossBreakdown:
    """Evaluate the loss breakdown without gradients."""
    tape = Tape(model.params)
    l_pde, l_t, l_x = loss_parts_on_tape(tape, model, problem, sets)
    return LossBreakdown(l_pde.value(), l_t.value(), l_x.value())

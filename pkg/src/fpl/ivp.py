"""Initial value problems y^(n) = f(t, y, ..., y^(n-1)) solved as fixed
points of a Volterra integral operator, iterated with the AT scheme.

The operator is

    T(y)(t) = sum_i p_i (t - a)**i / i!  +  int_a^t K(t, s) f(s, y(s), ..., y^(n-1)(s)) ds

with a user kernel K; K(t, s) = (t - s)**(n-1) / (n-1)! reproduces the IVP.
Integrals use the composite trapezoid rule on the solution grid itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .schemes import ControlSequences, SchemeId, StopRule, scheme_update


class IVPError(ValueError):
    pass


class ContractionBudgetError(IVPError):
    def __init__(self, budget: "ContractionBudget"):
        super().__init__(f"contraction budget alpha = {budget.alpha:.6g} >= 1, refusing to iterate")
        self.budget = budget


class NonConvergenceError(IVPError):
    def __init__(self, iterations: int, last_norm: float):
        super().__init__(f"no convergence after {iterations} iterations, last step norm {last_norm:.3e}")
        self.last_norm = last_norm


@dataclass(frozen=True, eq=False)
class GridFunction:
    a: float
    b: float
    values: np.ndarray
    deriv_order_max: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(values) < 2:
            raise IVPError("a grid function needs at least two nodes")
        if not self.b > self.a:
            raise IVPError(f"degenerate interval [{self.a}, {self.b}]")
        if not np.all(np.isfinite(values)):
            raise IVPError("grid function values must be finite")
        if self.deriv_order_max < 0 or len(values) <= 2 * self.deriv_order_max + 1:
            raise IVPError(
                f"{len(values)} nodes cannot carry derivatives up to order {self.deriv_order_max}"
            )

    @classmethod
    def sample(cls, fn: Callable, a: float, b: float, n_nodes: int, deriv_order_max: int = 0):
        t = np.linspace(a, b, n_nodes)
        return cls(a, b, np.broadcast_to(fn(t), t.shape), deriv_order_max)

    @property
    def n_nodes(self) -> int:
        return len(self.values)

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_nodes)

    def derivative(self, order: int) -> np.ndarray:
        return _fd_derivative(self.values, self.h, order)

    def same_grid(self, other: "GridFunction") -> bool:
        return (self.a, self.b, self.n_nodes, self.deriv_order_max) == (
            other.a,
            other.b,
            other.n_nodes,
            other.deriv_order_max,
        )

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.a, self.b, values, self.deriv_order_max)


def _fd_derivative(values: np.ndarray, h: float, order: int) -> np.ndarray:
    # central differences inside, first-order one-sided at the ends
    d = values
    for _ in range(order):
        d = np.gradient(d, h, edge_order=1)
    return d


def _cn_norm(diff: np.ndarray, h: float, deriv_order_max: int) -> float:
    return max(
        float(np.max(np.abs(_fd_derivative(diff, h, i)))) for i in range(deriv_order_max + 1)
    )


def cn_norm(x: GridFunction, y: GridFunction) -> float:
    """max over i <= deriv_order_max of sup |x^(i) - y^(i)|."""
    if not x.same_grid(y):
        raise IVPError("grid functions live on different grids")
    return _cn_norm(x.values - y.values, x.h, x.deriv_order_max)


eq19_norm = cn_norm  # public alias kept for the published operation name


@dataclass(frozen=True)
class IVPProblem:
    order: int
    rhs: Callable
    lipschitz: tuple[float, ...]
    kernel: Callable
    initial_values: tuple[float, ...]
    interval: tuple[float, float]
    name: str = "ivp"

    def __post_init__(self):
        object.__setattr__(self, "lipschitz", tuple(float(x) for x in self.lipschitz))
        object.__setattr__(self, "initial_values", tuple(float(x) for x in self.initial_values))
        if self.order < 1:
            raise IVPError("order must be >= 1")
        if len(self.lipschitz) != self.order:
            raise IVPError(f"need {self.order} Lipschitz constants, got {len(self.lipschitz)}")
        if any(x < 0 for x in self.lipschitz):
            raise IVPError("Lipschitz constants must be >= 0")
        if len(self.initial_values) != self.order:
            raise IVPError(f"need {self.order} initial values, got {len(self.initial_values)}")
        a, b = self.interval
        if not b > a:
            raise IVPError(f"degenerate interval [{a}, {b}]")

    def affine_part(self, t: np.ndarray) -> np.ndarray:
        a = self.interval[0]
        return np.zeros_like(t, dtype=float) + sum(
            p * (t - a) ** i / math.factorial(i) for i, p in enumerate(self.initial_values)
        )


class VolterraOperator:
    """T on a fixed grid; the kernel-weighted trapezoid matrix is built once."""

    def __init__(self, prob: IVPProblem, n_nodes: int):
        a, b = prob.interval
        self.prob = prob
        self.n_nodes = n_nodes
        self.t = np.linspace(a, b, n_nodes)
        self.h = (b - a) / (n_nodes - 1)
        self.affine = prob.affine_part(self.t)
        tt, ss = np.meshgrid(self.t, self.t, indexing="ij")
        with np.errstate(all="ignore"):
            k = np.broadcast_to(np.asarray(prob.kernel(tt, ss), dtype=float), tt.shape)
        weights = np.tril(np.full((n_nodes, n_nodes), self.h))
        weights[:, 0] *= 0.5
        weights[np.diag_indices(n_nodes)] *= 0.5
        weights[0, 0] = 0.0
        w = weights * np.where(weights > 0, k, 0.0)
        if not np.all(np.isfinite(w)):
            raise IVPError(f"{prob.name}: kernel is not finite on the grid")
        self.matrix = w

    def apply_values(self, y: np.ndarray) -> np.ndarray:
        derivs = [_fd_derivative(y, self.h, i) for i in range(self.prob.order)]
        with np.errstate(all="ignore"):
            f = np.broadcast_to(np.asarray(self.prob.rhs(self.t, *derivs), dtype=float), self.t.shape)
        if not np.all(np.isfinite(f)):
            raise IVPError(f"{self.prob.name}: right-hand side is not finite")
        return self.affine + self.matrix @ f

    def __call__(self, y: GridFunction) -> GridFunction:
        return y.with_values(self.apply_values(y.values))


def _check_grid(prob: IVPProblem, y: GridFunction) -> None:
    if (y.a, y.b) != tuple(prob.interval):
        raise IVPError(f"grid [{y.a}, {y.b}] does not match problem interval {prob.interval}")


def apply_T(prob: IVPProblem, y: GridFunction) -> GridFunction:
    _check_grid(prob, y)
    return VolterraOperator(prob, y.n_nodes)(y)


@dataclass(frozen=True)
class ContractionBudget:
    M_i: tuple[float, ...]
    lipschitz: tuple[float, ...]
    length: float

    @property
    def M(self) -> float:
        return max(self.M_i)

    @property
    def alpha(self) -> float:
        return self.length * sum(self.lipschitz) * self.M

    @property
    def solvable(self) -> bool:
        return self.alpha < 1


def estimate_alpha(prob: IVPProblem, grid_points: int = 401) -> ContractionBudget:
    """M_i = grid sup of |d^i K / dt^i| over s <= t, i = 0..n-1; the integral
    contributes the interval length, so alpha = (b - a) * M * sum(a_i)."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    a, b = prob.interval
    t = np.linspace(a, b, max(grid_points, 2 * prob.order + 2))
    h = t[1] - t[0]
    tt, ss = np.meshgrid(t, t, indexing="ij")
    with np.errstate(all="ignore"):
        k = np.broadcast_to(np.asarray(prob.kernel(tt, ss), dtype=float), tt.shape)
    if not np.all(np.isfinite(k)):
        raise IVPError(f"{prob.name}: kernel is not finite on the grid")
    lower = tt >= ss
    bounds = []
    d = k
    for i in range(prob.order):
        if i:
            d = np.gradient(d, h, axis=0, edge_order=1)
        bounds.append(float(np.max(np.abs(d[lower]))))
    return ContractionBudget(tuple(bounds), prob.lipschitz, b - a)


@dataclass(frozen=True, eq=False)
class IVPSolution:
    solution: GridFunction
    step_norms: tuple[float, ...]
    alpha: float
    budget: ContractionBudget
    history: tuple[GridFunction, ...] = field(repr=False, default=())

    @property
    def iterations(self) -> int:
        return len(self.step_norms)


def solve_via_at(
    prob: IVPProblem,
    ctrl: ControlSequences,
    stop: StopRule = StopRule(step_tol=1e-10),
    n_nodes: int = 2001,
    budget: Optional[ContractionBudget] = None,
) -> IVPSolution:
    """AT iteration of T on grid functions, starting from the affine part."""
    budget = budget or estimate_alpha(prob)
    if not budget.solvable:
        raise ContractionBudgetError(budget)
    ctrl.require(SchemeId.AT)
    T = VolterraOperator(prob, n_nodes)
    a, b = prob.interval
    deriv = prob.order - 1
    y = GridFunction(a, b, T.affine, deriv)
    history = [y]
    norms = []
    for m in range(stop.max_iters):
        nxt, _ = scheme_update(SchemeId.AT, T.apply_values, y.values, a=ctrl.a(m))
        step_norm = _cn_norm(nxt - y.values, T.h, deriv)
        y = y.with_values(nxt)
        history.append(y)
        norms.append(step_norm)
        if step_norm < stop.step_tol:
            return IVPSolution(y, tuple(norms), budget.alpha, budget, tuple(history))
    raise NonConvergenceError(stop.max_iters, norms[-1])


def decay_problem(b: float = 0.5) -> IVPProblem:
    """y' = -y, y(0) = 1; exact solution exp(-t)."""
    return IVPProblem(
        order=1,
        rhs=lambda s, y: -y,
        lipschitz=(1.0,),
        kernel=lambda t, s: np.ones_like(t),
        initial_values=(1.0,),
        interval=(0.0, b),
        name="decay",
    )


def harmonic_problem(b: float = 0.9) -> IVPProblem:
    """y'' + y = 0, y(0) = 0, y'(0) = 1; exact solution sin(t)."""
    return IVPProblem(
        order=2,
        rhs=lambda s, y, dy: -y,
        lipschitz=(1.0, 0.0),
        kernel=lambda t, s: t - s,
        initial_values=(0.0, 1.0),
        interval=(0.0, b),
        name="harmonic",
    )


PROBLEMS = {
    "decay": (decay_problem, lambda t: np.exp(-t)),
    "harmonic": (harmonic_problem, np.sin),
}

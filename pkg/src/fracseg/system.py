"""Steady states of the k-component competition system in extension form.

Each component satisfies L_a v_i = 0 in the volume with the nonlinear trace
flux d_nu^a v_i = f_i(v_i) - beta v_i sum_j a_ij v_j^2.  The solver runs a
component-wise Gauss-Seidel sweep: every component solves a linear extension
problem whose absorption m(x) = beta sum a_ij v_j(x,0)^2 freezes the other
components (semi-implicit, sign-preserving) and whose source term is the
lagged reaction.  Sweeping the coupling strength beta with warm starts
produces the segregation data: trace overlaps, sup norms and Hölder
seminorms per beta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .core import FracParams
from .diagnostics import trace_seminorm
from .errors import ConfigurationError, ConvergenceError
from .grid import (BoundaryData, Field, GridConfig, HalfSpaceGrid,
                   _boundary_masks, _solve_spd, _trace_area, build_grid)

REACTION_KINDS = ("zero", "linear", "logistic")


@dataclass(frozen=True)
class Reaction:
    """Per-component reaction term: zero, linear lam*u, or logistic lam*u*(1-u)."""

    kind: str = "zero"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in REACTION_KINDS:
            raise ConfigurationError(f"unknown reaction kind {self.kind!r}")
        if not (np.isfinite(self.lam) and abs(self.lam) <= 1e3):
            raise ConfigurationError("reaction rate must be finite and moderate")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "linear":
            return self.lam * u
        return self.lam * u * (1.0 - u)


@dataclass
class CompetitionProblem:
    """Data of the k-component system on a truncated half-space grid."""

    params: FracParams
    grid_config: GridConfig
    k: int
    beta: float
    coupling: np.ndarray
    reactions: tuple
    dirichlet: tuple  # per-component value spec for top and lateral walls

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("component count must be >= 1")
        if self.beta < 0:
            raise ConfigurationError("beta must be nonnegative")
        c = np.asarray(self.coupling, dtype=float)
        if c.shape != (self.k, self.k):
            raise ConfigurationError("coupling matrix must be k x k")
        if not np.allclose(c, c.T):
            raise ConfigurationError("coupling matrix must be symmetric")
        if np.any(np.abs(np.diag(c)) > 0):
            raise ConfigurationError("coupling diagonal must vanish")
        off = c[~np.eye(self.k, dtype=bool)]
        if self.k > 1 and np.any(off <= 0):
            raise ConfigurationError("off-diagonal couplings must be positive")
        self.coupling = c
        if len(self.reactions) != self.k or len(self.dirichlet) != self.k:
            raise ConfigurationError("need one reaction and one boundary spec "
                                     "per component")


@dataclass
class SolveResult:
    fields: list
    residual_history: list
    outer_iters: int
    converged: bool
    monotone_violations: int = 0

    @property
    def traces(self) -> list:
        return [f.trace for f in self.fields]


class _ComponentSolver:
    """Pre-assembled linear machinery shared by all outer sweeps."""

    def __init__(self, grid: HalfSpaceGrid, dirichlet_specs):
        self.grid = grid
        self.area = _trace_area(grid).ravel()
        A = grid.operator
        k = len(dirichlet_specs)
        self.dvals = []
        rhs_dir = []
        mask = None
        for spec in dirichlet_specs:
            bd = BoundaryData(top=spec, sides=spec)
            dmask, dv = _boundary_masks(grid, bd)
            mask = dmask if mask is None else mask
            self.dvals.append(dv)
        flat = mask.ravel()
        self.unk = np.flatnonzero(~flat)
        dir_ = np.flatnonzero(flat)
        self.A_uu = A[self.unk][:, self.unk].tocsr()
        A_ud = A[self.unk][:, dir_]
        self.rhs_dir = [-(A_ud @ dv.ravel()[dir_]) for dv in self.dvals]
        pos = np.full(grid.n_nodes, -1, dtype=np.int64)
        pos[self.unk] = np.arange(self.unk.size)
        trace_sl = (slice(None),) * grid.d + (0,)
        tr_idx = np.arange(grid.n_nodes).reshape(grid.shape)[trace_sl].ravel()
        rows = pos[tr_idx]
        self.trace_free = rows >= 0  # lateral-Dirichlet corners drop out
        self.trace_rows = rows[self.trace_free]

    def solve(self, ci: int, m: np.ndarray, g0: np.ndarray,
              tol: float) -> np.ndarray:
        diag = np.zeros(self.unk.size)
        diag[self.trace_rows] = (m.ravel() * self.area)[self.trace_free]
        A = self.A_uu + sps.diags(diag)
        rhs = self.rhs_dir[ci].copy()
        rhs[self.trace_rows] += (g0.ravel() * self.area)[self.trace_free]
        sol, _ = _solve_spd(A.tocsr(), rhs, tol=tol, maxiter=None, method="auto")
        full = self.dvals[ci].ravel().copy()
        full[self.unk] = sol
        return full.reshape(self.grid.shape)


def solve_system(prob: CompetitionProblem, warm_start=None, tol: float = 1e-8,
                 max_outer: int = 500, inner_tol: float = 1e-10) -> SolveResult:
    """Gauss-Seidel outer iteration (ascending component index) until the
    max-norm change of successive iterates drops below tol.

    Nonnegative boundary data yields nonnegative fields (the frozen-neighbor
    absorption only adds to the M-matrix diagonal).  Raises ConvergenceError
    with the residual history if the sweep cap is exceeded or NaNs appear.
    """
    grid = build_grid(prob.grid_config, prob.params)
    solver = _ComponentSolver(grid, prob.dirichlet)
    k = prob.k
    if warm_start is not None:
        if len(warm_start) != k:
            raise ConfigurationError("warm start must supply every component")
        vals = [np.array(f.values if isinstance(f, Field) else f, dtype=float)
                for f in warm_start]
        for v in vals:
            if v.shape != grid.shape:
                raise ConfigurationError("warm start grid does not match")
    else:
        vals = [np.zeros(grid.shape) for _ in range(k)]

    history = []
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        change = 0.0
        for i in range(k):
            tr_i = vals[i][(slice(None),) * grid.d + (0,)]
            m = np.zeros_like(tr_i)
            for j in range(k):
                if j == i:
                    continue
                tr_j = vals[j][(slice(None),) * grid.d + (0,)]
                m += prob.coupling[i, j] * tr_j ** 2
            m *= prob.beta
            g0 = prob.reactions[i](tr_i)
            new = solver.solve(i, m, g0, inner_tol)
            change = max(change, float(np.abs(new - vals[i]).max()))
            vals[i] = new
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ConvergenceError("NaN detected in outer iteration",
                                   iterations=outer, history=history)
        history.append(change)
        if change <= tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"outer iteration cap {max_outer} exceeded (last change "
            f"{history[-1]:.3e})", residual=history[-1], iterations=max_outer,
            history=history)

    tail = history[5:]
    monotone_violations = int(np.sum(np.diff(tail) > 0)) if len(tail) > 1 else 0
    fields = [Field(grid, v, component=i) for i, v in enumerate(vals)]
    return SolveResult(fields=fields, residual_history=history,
                       outer_iters=outer, converged=converged,
                       monotone_violations=monotone_violations)


def trace_overlap(result: SolveResult) -> float:
    """Trace overlap sum_{i<j} int u_i^2 u_j^2 dx over the whole trace."""
    grid = result.fields[0].grid
    area = _trace_area(grid)
    total = 0.0
    traces = result.traces
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            total += float(np.sum(area * traces[i] ** 2 * traces[j] ** 2))
    return total


@dataclass
class SweepRow:
    beta: float
    sup_norms: list
    overlap: float
    beta_times_overlap: float
    holder_alpha: float
    holder_seminorm: float
    outer_iters: int


@dataclass
class BetaSweep:
    rows: list
    results: list = field(default_factory=list, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        k = len(self.rows[0].sup_norms)
        header = (["beta"] + [f"sup_norm_{i}" for i in range(k)]
                  + ["overlap", "beta_times_overlap", "holder_alpha",
                     "holder_seminorm", "outer_iters"])
        lines = [",".join(header)]
        for r in self.rows:
            cells = ([r.beta] + list(r.sup_norms)
                     + [r.overlap, r.beta_times_overlap, r.holder_alpha,
                        r.holder_seminorm, r.outer_iters])
            lines.append(",".join(format(c, ".12g") for c in cells))
        return "\n".join(lines) + "\n"


def sweep_beta(prob: CompetitionProblem, betas, holder_alpha: float,
               x_window: float | None = None, tol: float = 1e-8,
               max_outer: int = 500, keep_results: bool = False,
               warm_start: bool = True) -> BetaSweep:
    """Solve along an increasing beta list, warm-starting each solve.

    Records per beta: sup norms, trace overlap, beta * overlap, and the trace
    Hölder seminorm at holder_alpha restricted to the inner half of the
    trace (|x| <= L/2 unless x_window overrides it).
    """
    betas = np.asarray(betas, dtype=float)
    if betas.size == 0 or np.any(np.diff(betas) <= 0):
        raise ConfigurationError("betas must be a nonempty increasing list")
    if x_window is None:
        x_window = 0.5 * prob.grid_config.L
    rows = []
    results = []
    fields = None
    for b in betas:
        prob_b = CompetitionProblem(
            params=prob.params, grid_config=prob.grid_config, k=prob.k,
            beta=float(b), coupling=prob.coupling, reactions=prob.reactions,
            dirichlet=prob.dirichlet)
        try:
            res = solve_system(prob_b, warm_start=fields if warm_start else None,
                               tol=tol, max_outer=max_outer)
        except ConvergenceError as exc:
            raise ConvergenceError(f"sweep failed at beta={b:g}: {exc}",
                                   residual=exc.residual,
                                   iterations=exc.iterations,
                                   history=exc.history) from exc
        fields = res.fields
        overlap = trace_overlap(res)
        semi = max(trace_seminorm(f, holder_alpha, x_window=x_window)
                   for f in res.fields)
        rows.append(SweepRow(
            beta=float(b),
            sup_norms=[float(np.abs(f.values).max()) for f in res.fields],
            overlap=overlap, beta_times_overlap=float(b) * overlap,
            holder_alpha=holder_alpha, holder_seminorm=semi,
            outer_iters=res.outer_iters))
        if keep_results:
            results.append(res)
    return BetaSweep(rows=rows, results=results)

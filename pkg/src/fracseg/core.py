"""Scalar maps, kernels and closed-form model solutions of the extension problem.

Everything in this module is a pure function of its inputs.  The objects here
(homogeneity map, regularized kernel, explicit homogeneous solutions, the
1-D comparison profile and the half-space Poisson kernel) serve as fixtures
and building blocks for the grid solver, the diagnostics and the eigenvalue
machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

SOLUTION_TAGS = ("vanish_trace", "halfspace", "codim1", "fundamental")

#: homogeneity degree of each named solution, as a function of (s, N)
_DEGREES = {
    "vanish_trace": lambda s, N: 2.0 * s,
    "halfspace": lambda s, N: s,
    "codim1": lambda s, N: 2.0 * s - 1.0,
    "fundamental": lambda s, N: 2.0 * s - N,
}


@dataclass(frozen=True)
class FracParams:
    """Fractional order s in (0,1) and ambient trace dimension N >= 1.

    The weight exponent a = 1 - 2s is derived, so the relation holds exactly.
    """

    s: float
    N: int = 1

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def half_gap(self) -> float:
        """(N - 2s) / 2, the offset entering the homogeneity map."""
        return 0.5 * (self.N - 2.0 * self.s)


def gamma_map(t, p: FracParams):
    """Homogeneity degree of the eigenvalue-t homogeneous harmonic extension.

    gamma(t) = sqrt(((N-2s)/2)^2 + t) - (N-2s)/2.  Nonnegative and strictly
    increasing for t >= 0.  The discriminant is clamped at zero to guard
    against negative round-off.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("gamma_map requires t >= 0")
    half = p.half_gap
    out = np.sqrt(np.maximum(half * half + t, 0.0)) - half
    return float(out) if out.ndim == 0 else out


def gamma_inverse(g, p: FracParams):
    """Algebraic inverse of gamma_map: t = g^2 + (N - 2s) g."""
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma_inverse requires g >= 0")
    out = g * g + (p.N - 2.0 * p.s) * g
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NamedSolution:
    """One of the explicit homogeneous solutions used as fixtures.

    vanish_trace  y^{2s}                        degree 2s, trace == 0
    halfspace     ((|(x1,y)| + x1)/2)^s         degree s,  trace == 0 on x1 <= 0
    codim1        (x1^2 + y^2)^{(2s-1)/2}       degree 2s-1, needs s > 1/2
    fundamental   |X|^{2s-N}                    degree 2s-N, needs N > 2s
    """

    tag: str
    params: FracParams

    def __post_init__(self):
        if self.tag not in SOLUTION_TAGS:
            raise ValueError(f"unknown solution tag {self.tag!r}")
        if self.tag == "codim1" and self.params.s <= 0.5:
            raise ValueError("codim1 solution requires s > 1/2")
        if self.tag == "fundamental" and self.params.N <= 2.0 * self.params.s:
            raise ValueError("fundamental solution requires N > 2s")

    @property
    def degree(self) -> float:
        return _DEGREES[self.tag](self.params.s, self.params.N)


def _split_point(X):
    """Split points (..., m) into (x1, y, |X|); y is the last coordinate."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] < 2:
        raise ValueError("points must have at least (x1, y) coordinates")
    x1 = X[..., 0]
    y = X[..., -1]
    if np.any(y < 0):
        raise ValueError("points must lie in the closed upper half-space y >= 0")
    r = np.sqrt(np.sum(X * X, axis=-1))
    return x1, y, r


def eval_solution(sol: NamedSolution, X):
    """Evaluate a named solution at points X of shape (..., m), y last."""
    s = sol.params.s
    x1, y, r = _split_point(X)
    if sol.tag == "vanish_trace":
        out = y ** (2.0 * s)
    elif sol.tag == "halfspace":
        rho = np.hypot(x1, y)
        out = (0.5 * (rho + x1)) ** s
    elif sol.tag == "codim1":
        out = np.hypot(x1, y) ** (2.0 * s - 1.0)
    else:  # fundamental
        if np.any(r == 0):
            raise ValueError("fundamental solution is singular at X = 0")
        out = r ** (2.0 * s - sol.params.N)
    return float(out) if np.ndim(out) == 0 else out


def dtn_exact(sol: NamedSolution, x1):
    """Weighted normal derivative -lim y^a d_y v of a named solution on y = 0.

    x1 is the first trace coordinate (the only one these solutions depend
    on).  vanish_trace gives the constant -2s.  halfspace gives 0 on x1 > 0
    (where the trace is positive) and -2s (4|x1|)^{-s} on x1 < 0 (where the
    trace vanishes); x1 = 0 is excluded.
    """
    s = sol.params.s
    x1 = np.asarray(x1, dtype=float)
    if sol.tag == "vanish_trace":
        out = np.full(np.shape(x1), -2.0 * s)
    elif sol.tag == "halfspace":
        if np.any(x1 == 0):
            raise ValueError("halfspace trace derivative needs x1 != 0")
        out = np.where(x1 > 0, 0.0, -2.0 * s * (4.0 * np.abs(x1)) ** (-s))
    else:
        raise NotImplementedError(f"no closed-form trace derivative for {sol.tag!r}")
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RegularizedKernel:
    """C^1 regularization of the power kernel |X|^{2s-N}.

    Outside radius eps it equals |X|^{2s-N}; inside it is the parabola that
    matches value and slope at the seam.  As eps decreases the kernel
    increases pointwise toward the bare power (N > 2s required).
    """

    eps: float
    params: FracParams

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.params.N <= 2.0 * self.params.s:
            raise ValueError("regularized kernel requires N > 2s")

    def profile(self, r):
        """Kernel value as a function of the radius |X| >= 0."""
        s, N = self.params.s, self.params.N
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        scale = self.eps ** (2.0 * s - N)
        rho = r / self.eps
        inner = scale * (0.5 * (N + 2.0 * (1.0 - s)) - 0.5 * (N - 2.0 * s) * rho * rho)
        with np.errstate(divide="ignore"):
            outer = np.where(r > 0, r, 1.0) ** (2.0 * s - N)
        out = np.where(rho < 1.0, inner, outer)
        return float(out) if out.ndim == 0 else out


def kernel_eval(kernel: RegularizedKernel, X):
    """Evaluate the regularized kernel at points X in the closed half-space."""
    _, _, r = _split_point(X)
    return kernel.profile(r)


def _comparison_density(t, a):
    return (1.0 + t * t) ** (0.5 * a - 1.0)


_TAIL_CUT = 1.0e4


def _comparison_tail(x, a):
    """Integral of the density over [x, inf) for x >= the tail cut.

    Two-term expansion of t^{a-2}(1 + t^-2)^{(a-2)/2}; the next term is
    O(x^{a-5}), far below the quadrature tolerance at the cut.
    """
    return x ** (a - 1.0) / (1.0 - a) + 0.5 * (a - 2.0) * x ** (a - 3.0) / (3.0 - a)


def _comparison_segment(lo, hi, a):
    """Adaptive quadrature of the density over [lo, hi] within [0, cut]."""
    pts = [p for p in (1.0, 10.0, 100.0, 1000.0) if lo < p < hi]
    seg, _ = quad(_comparison_density, lo, hi, args=(a,),
                  epsabs=1e-11, epsrel=1e-12, limit=500, points=pts or None)
    return seg


@lru_cache(maxsize=32)
def _comparison_mass(a: float) -> float:
    """Total integral of (1+t^2)^{(a-2)/2} over the line (a in (-1,1))."""
    return 2.0 * (_comparison_segment(0.0, _TAIL_CUT, a) + _comparison_tail(_TAIL_CUT, a))


def comparison_f(x, p: FracParams):
    """Normalized antiderivative of (1+t^2)^{(a-2)/2}; increasing, range (0,1).

    Computed by adaptive quadrature (absolute tolerance 1e-10), splitting at
    t = 0 and switching to the tail asymptotic beyond |t| = 1e4.
    """
    a = p.a
    mass = _comparison_mass(a)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    flat = np.atleast_1d(x).ravel()
    out = np.empty_like(flat)
    for i, xi in enumerate(flat):
        if np.isnan(xi):
            out[i] = np.nan
        elif xi >= _TAIL_CUT:
            out[i] = 1.0 - _comparison_tail(xi, a) / mass
        elif xi <= -_TAIL_CUT:
            out[i] = _comparison_tail(-xi, a) / mass
        else:
            sign = 1.0 if xi >= 0 else -1.0
            seg = _comparison_segment(0.0, abs(xi), a)
            out[i] = 0.5 + sign * seg / mass
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(x))


def poisson_kernel(xi, y, p: FracParams):
    """Half-space Poisson kernel, unit mass in xi for every y > 0.

    P(xi, y) = C_a * y^{1-a} / (xi^2 + y^2)^{1-a/2} with C_a fixed by the
    normalization; it satisfies P(xi, y) = P(xi/y, 1) / y.
    """
    a = p.a
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("poisson_kernel requires y > 0")
    c = 1.0 / _comparison_mass(a)
    out = c * y ** (1.0 - a) / (xi * xi + y * y) ** (1.0 - 0.5 * a)
    return float(out) if np.ndim(out) == 0 else out

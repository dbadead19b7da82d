"""Weighted hemisphere eigenvalues and the two-cap partition scan.

Solves the first eigenvalue of the weighted Laplace-Beltrami form on the
upper hemisphere with Dirichlet conditions on part of the equator: the
Rayleigh quotient of int y^a |grad_T u|^2 over int y^a u^2, with y the
vertical coordinate of the sphere point.  The N = 2 mesh is a (theta, phi)
tensor grid with a collapsed pole and cells graded toward the equator; the
N = 1 half-circle is kept as a cheap oracle.  The cap scan evaluates the
mean homogeneity of antipodally centered equator caps and returns its
minimum, an upper bound for the partition optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.integrate import quad

from .core import FracParams, gamma_map
from .errors import ConfigurationError, ConvergenceError

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EquatorRegion:
    """Free (non-Dirichlet) part of the equator.

    For N = 2 a union of angular arcs (lo, hi) in radians; for N = 1 a pair
    of booleans marking whether each endpoint of the half-circle is free.
    """

    arcs: tuple = ()
    ends: tuple | None = None

    def __post_init__(self):
        total = 0.0
        for lo, hi in self.arcs:
            if not hi > lo:
                raise ValueError("arc must have hi > lo")
            total += hi - lo
        if total > _TWO_PI + 1e-12:
            raise ValueError("arcs overlap: total measure exceeds 2*pi")

    @staticmethod
    def full(N: int = 2) -> "EquatorRegion":
        return EquatorRegion(arcs=((0.0, _TWO_PI),)) if N == 2 else \
            EquatorRegion(ends=(True, True))

    @staticmethod
    def empty(N: int = 2) -> "EquatorRegion":
        return EquatorRegion() if N == 2 else EquatorRegion(ends=(False, False))

    @staticmethod
    def half(N: int = 2) -> "EquatorRegion":
        """The half equator x1 > 0."""
        return EquatorRegion(arcs=((-0.5 * math.pi, 0.5 * math.pi),)) if N == 2 \
            else EquatorRegion(ends=(True, False))

    @staticmethod
    def cap(center: float, radius: float) -> "EquatorRegion":
        """Open arc of the given angular radius about center (N = 2)."""
        if radius <= 0.0:
            return EquatorRegion()
        if radius >= math.pi:
            return EquatorRegion.full(2)
        return EquatorRegion(arcs=((center - radius, center + radius),))

    def contains(self, phi: np.ndarray) -> np.ndarray:
        """Membership of equator angles (N = 2), up to 2*pi wrapping."""
        out = np.zeros(np.shape(phi), dtype=bool)
        for lo, hi in self.arcs:
            span = hi - lo
            if span >= _TWO_PI - 1e-12:
                out |= True
                continue
            rel = np.mod(np.asarray(phi) - lo, _TWO_PI)
            out |= rel < span
        return out


@dataclass(frozen=True)
class CapPair:
    """Angular radii of two antipodally centered equator caps."""

    t1: float
    t2: float

    def __post_init__(self):
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError("cap radii must be nonnegative")
        if self.t1 + self.t2 > math.pi + 1e-12:
            raise ValueError("caps overlap: t1 + t2 must not exceed pi")


_SIN_SERIES_CUT = 0.2


def _sin_pow_primitive_near0(t: np.ndarray, a: float):
    """Primitive of sin(alpha)^a for alpha <= the series cut.

    sin^a = alpha^a (1 - a alpha^2/6 + (a^2/72 - a/180) alpha^4 + O(alpha^6));
    the truncation is ~1e-9 relative at the cut.
    """
    t = np.asarray(t, dtype=float)
    return (t ** (1.0 + a) / (1.0 + a)
            - (a / 6.0) * t ** (3.0 + a) / (3.0 + a)
            + (a * a / 72.0 - a / 180.0) * t ** (5.0 + a) / (5.0 + a))


def _int_sin_pow(a: float, lo: float, hi: float) -> float:
    """Integral of sin(alpha)^a over [lo, hi] within [0, pi], a > -1.

    Series primitives near the (integrable) endpoint singularities, adaptive
    quadrature in the middle.
    """
    if hi <= lo:
        return 0.0
    total = 0.0
    cut0 = _SIN_SERIES_CUT
    cut1 = math.pi - _SIN_SERIES_CUT
    left = (max(lo, 0.0), min(hi, cut0))
    if left[1] > left[0]:
        total += float(_sin_pow_primitive_near0(left[1], a)
                       - _sin_pow_primitive_near0(left[0], a))
    right = (max(lo, cut1), min(hi, math.pi))
    if right[1] > right[0]:
        total += float(_sin_pow_primitive_near0(math.pi - right[0], a)
                       - _sin_pow_primitive_near0(math.pi - right[1], a))
    mid = (max(lo, cut0), min(hi, cut1))
    if mid[1] > mid[0]:
        val, _ = quad(lambda t: math.sin(t) ** a, mid[0], mid[1], limit=200)
        total += val
    return total


@dataclass(frozen=True)
class HemisphereMesh:
    """Tensor mesh of the upper hemisphere (N = 2) or half-circle (N = 1).

    theta is the polar angle from the pole, graded toward the equator where
    the eigenfunctions have their t^{gamma} boundary layers; phi is uniform
    and periodic.  All metric coefficients are exact cell integrals of the
    weighted surface measure.
    """

    params: FracParams
    ntheta: int = 64
    nphi: int = 128
    grading: float | None = None

    def __post_init__(self):
        if self.params.N not in (1, 2):
            raise ConfigurationError("hemisphere mesh supports N in {1, 2}")
        if self.ntheta < 4:
            raise ConfigurationError("ntheta must be >= 4")
        if self.params.N == 2 and (self.nphi < 8 or self.nphi % 2):
            raise ConfigurationError("nphi must be even and >= 8")

    @property
    def grading_exp(self) -> float:
        """Equator clustering exponent; resolves the t^{2s} Dirichlet layers."""
        if self.grading is not None:
            return self.grading
        return min(8.0, max(1.0, 1.0 / self.params.s))

    @cached_property
    def theta(self) -> np.ndarray:
        """Node polar angles, pole first, equator last (N = 2)."""
        g = self.grading_exp
        i = np.arange(self.ntheta + 1, dtype=float)
        th = 0.5 * math.pi * (1.0 - (1.0 - i / self.ntheta) ** g)
        if np.any(np.diff(th) <= 0):
            raise ConfigurationError(
                "polar grading underflows the node spacing; lower grading")
        return th

    @cached_property
    def alpha(self) -> np.ndarray:
        """Half-circle nodes (N = 1), graded toward both endpoints."""
        g = self.grading_exp
        t = np.arange(self.ntheta + 1, dtype=float) / self.ntheta
        w = t ** g / (t ** g + (1.0 - t) ** g)
        return math.pi * w

    @property
    def phi(self) -> np.ndarray:
        return _TWO_PI * np.arange(self.nphi) / self.nphi


def _build_forms_ncircle(mesh: HemisphereMesh):
    """Stiffness and lumped mass of the weighted half-circle problem."""
    a = mesh.params.a
    al = mesh.alpha
    n = al.size
    cell = np.array([_int_sin_pow(a, al[i], al[i + 1]) for i in range(n - 1)])
    cond = cell / np.diff(al) ** 2
    mid = 0.5 * (al[:-1] + al[1:])
    edges = np.concatenate(([al[0]], mid, [al[-1]]))
    massd = np.array([_int_sin_pow(a, edges[i], edges[i + 1]) for i in range(n)])
    rows = np.concatenate([np.arange(n - 1), np.arange(1, n)])
    cols = np.concatenate([np.arange(1, n), np.arange(n - 1)])
    vals = np.concatenate([-cond, -cond])
    K = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    K = K + sps.diags(-np.asarray(K.sum(axis=1)).ravel())
    M = sps.diags(massd)
    equator_nodes = np.array([0, n - 1])
    return K.tocsr(), M.tocsr(), equator_nodes


def _build_forms_hemisphere(mesh: HemisphereMesh):
    """Stiffness/mass of the weighted hemisphere with a collapsed pole.

    Node layout: index 0 is the pole; ring i (1 <= i <= ntheta) holds nphi
    nodes; the last ring is the equator.  Weight cos(theta)^a against the
    surface measure sin(theta) dtheta dphi; theta-cell integrals have the
    exact primitive -cos^{1+a}/(1+a), phi-conductance cells use numerical
    quadrature of cos^a/sin away from the pole.
    """
    p = mesh.params
    a = p.a
    th = mesh.theta
    nt, np_ = mesh.ntheta, mesh.nphi
    dphi = _TWO_PI / np_

    def wcell(t0, t1):
        # integral of cos^a sin over [t0, t1]
        return (math.cos(t0) ** (1 + a) - math.cos(t1) ** (1 + a)) / (1 + a)

    tmid = 0.5 * (th[:-1] + th[1:])
    dual_edges = np.concatenate(([th[0]], tmid, [th[-1]]))

    def index(ring, j):
        return 1 + (ring - 1) * np_ + (j % np_)

    n_nodes = 1 + nt * np_
    rows, cols, vals = [], [], []
    jj = np.arange(np_)

    def add(pidx, qidx, g):
        rows.extend([pidx, qidx])
        cols.extend([qidx, pidx])
        vals.extend([-g, -g])

    def add_arr(parr, qarr, g):
        rows.append(parr)
        cols.append(qarr)
        vals.append(np.full(parr.shape, -g))
        rows.append(qarr)
        cols.append(parr)
        vals.append(np.full(parr.shape, -g))

    # theta edges
    for i in range(nt):
        g_theta = wcell(th[i], th[i + 1]) / (th[i + 1] - th[i]) ** 2 * dphi
        if i == 0:
            for j in range(np_):
                add(0, index(1, j), g_theta)
        else:
            add_arr(index(i, jj), index(i + 1, jj), g_theta)

    # phi edges (rings 1..nt); conductance from the ring's dual theta strip
    for i in range(1, nt + 1):
        lo, hi = dual_edges[i], dual_edges[i + 1]
        val, _ = quad(lambda t: math.cos(t) ** a / math.sin(t), lo, hi, limit=200)
        g_phi = val / dphi
        add_arr(index(i, jj), index(i, (jj + 1) % np_), g_phi)

    rows = np.concatenate([np.atleast_1d(r) for r in rows])
    cols = np.concatenate([np.atleast_1d(c) for c in cols])
    vals = np.concatenate([np.atleast_1d(v) for v in vals])
    K = sps.coo_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    K = K + sps.diags(-np.asarray(K.sum(axis=1)).ravel())

    massd = np.empty(n_nodes)
    massd[0] = wcell(dual_edges[0], dual_edges[1]) * _TWO_PI
    for i in range(1, nt + 1):
        massd[index(i, jj)] = wcell(dual_edges[i], dual_edges[i + 1]) * dphi

    equator_nodes = index(nt, jj)
    return K.tocsr(), sps.diags(massd).tocsr(), equator_nodes


def _forms(mesh: HemisphereMesh):
    if mesh.params.N == 1:
        return _build_forms_ncircle(mesh)
    return _build_forms_hemisphere(mesh)


def _lowest_pair(K, M, free, tol=1e-9, maxiter=2000):
    """Smallest eigenpair of the restricted pencil by shift-invert iteration.

    Shift-invert Lanczos (ARPACK) with a small negative shift, so the
    factored operator stays definite even when the full-equator null vector
    is present; deterministic start vector.
    """
    Kf = K[free][:, free].tocsc()
    Mf = M[free][:, free].tocsc()
    n = Kf.shape[0]
    if n == 1:
        lam = float(Kf[0, 0] / Mf[0, 0])
        return max(lam, 0.0), np.ones(1)
    sigma = -1e-8 * float(Kf.diagonal().mean())
    v0 = np.ones(n)
    try:
        vals, vecs = spla.eigsh(Kf, k=1, M=Mf, sigma=sigma, which="LM",
                                v0=v0, tol=tol, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:  # pragma: no cover
        raise ConvergenceError("eigen-iteration did not converge",
                               iterations=maxiter) from exc
    return max(float(vals[0]), 0.0), vecs[:, 0]


def lambda1(mesh: HemisphereMesh, omega: EquatorRegion, tol: float = 1e-9):
    """First eigenvalue with u = 0 on the equator outside omega.

    Returns (eigenvalue, eigenfunction on all mesh nodes); the eigenfunction
    is normalized sign-definite, first nonzero entry positive.
    """
    K, M, eq_nodes = _forms(mesh)
    n = K.shape[0]
    fixed = np.zeros(n, dtype=bool)
    if mesh.params.N == 1:
        ends = omega.ends if omega.ends is not None else (False, False)
        for marker, node in zip(ends, eq_nodes):
            if not marker:
                fixed[node] = True
    else:
        free_eq = omega.contains(mesh.phi)
        fixed[eq_nodes[~free_eq]] = True
    free = np.flatnonzero(~fixed)
    if free.size == 0:
        raise ConfigurationError("no free nodes: the Dirichlet set is everything")
    lam, vf = _lowest_pair(K, M, free, tol=tol)
    vec = np.zeros(n)
    vec[free] = vf
    nz = np.flatnonzero(np.abs(vec) > 1e-12 * np.abs(vec).max())
    if nz.size and vec[nz[0]] < 0:
        vec = -vec
    return lam, vec


def lambda1_codim1(mesh: HemisphereMesh, tol: float = 1e-9):
    """Eigenvalue with Dirichlet data only at the two equator nodes nearest
    the x1 = 0 plane (N = 2, s > 1/2 for a capacity-positive constraint)."""
    if mesh.params.N != 2:
        raise ConfigurationError("codim-1 constraint needs the N = 2 mesh")
    K, M, eq_nodes = _forms(mesh)
    phi = mesh.phi
    fixed = np.zeros(K.shape[0], dtype=bool)
    for target in (0.5 * math.pi, 1.5 * math.pi):
        j = int(np.argmin(np.abs(phi - target)))
        fixed[eq_nodes[j]] = True
    free = np.flatnonzero(~fixed)
    lam, _ = _lowest_pair(K, M, free, tol=tol)
    return lam


def eigenfunction_sign_definite(vec: np.ndarray, rtol: float = 1e-8) -> bool:
    scale = np.abs(vec).max()
    if scale == 0:
        return True
    return vec.min() >= -rtol * scale or vec.max() <= rtol * scale


@dataclass
class CapScanResult:
    s: float
    nu_hat: float
    argmin: CapPair
    table: list  # rows (t1, t2, lam1, lam2, gamma1, gamma2, mean_gamma)
    #: mass-weighted overlap of the optimal pair's eigenfunction supports,
    #: recorded as data: the minimizers separate on the equator only, not on
    #: the whole hemisphere
    support_overlap: float = float("nan")


def nu_acf_caps(mesh: HemisphereMesh, radii_grid=None) -> CapScanResult:
    """Scan antipodally centered cap pairs for the minimal mean homogeneity.

    Evaluates (gamma(lambda1(cap t1)) + gamma(lambda1(cap t2)))/2 over the
    grid of disjoint cap pairs and returns the minimum: an upper bound for
    the partition infimum, restricted to caps.  Cap radius 0 is the empty
    region; radius pi is the full equator.
    """
    p = mesh.params
    if radii_grid is None:
        radii_grid = np.linspace(0.0, math.pi, 9)
    radii_grid = np.asarray(radii_grid, dtype=float)
    lam_cache: dict[float, float] = {}

    def lam_of(t: float) -> float:
        key = round(float(t), 12)
        if key not in lam_cache:
            region = EquatorRegion.cap(0.0, t)
            lam_cache[key], _ = lambda1(mesh, region)
        return lam_cache[key]

    table = []
    best = (math.inf, None)
    for t1 in radii_grid:
        for t2 in radii_grid:
            if t1 > t2 or t1 + t2 > math.pi + 1e-12:
                continue
            l1, l2 = lam_of(t1), lam_of(t2)
            g1, g2 = gamma_map(l1, p), gamma_map(l2, p)
            mean = 0.5 * (g1 + g2)
            table.append((float(t1), float(t2), l1, l2, g1, g2, mean))
            if mean < best[0]:
                best = (mean, CapPair(float(t1), float(t2)))
    overlap = _support_overlap(mesh, best[1])
    return CapScanResult(s=p.s, nu_hat=best[0], argmin=best[1], table=table,
                         support_overlap=overlap)


def _support_overlap(mesh: HemisphereMesh, pair: CapPair) -> float:
    """Mass-weighted overlap of the optimal eigenfunction pair's supports."""
    _, M, _ = _forms(mesh)
    m = M.diagonal()
    _, u1 = lambda1(mesh, EquatorRegion.cap(0.0, pair.t1))
    _, u2 = lambda1(mesh, EquatorRegion.cap(math.pi, pair.t2))
    a1, a2 = np.abs(u1), np.abs(u2)
    both = float(np.sum(m * a1 * a2))
    norm = math.sqrt(float(np.sum(m * a1 * a1)) * float(np.sum(m * a2 * a2)))
    return both / norm if norm > 0 else 0.0

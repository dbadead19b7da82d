"""Finite-volume discretization of L_a = -div(y^a grad .) on a truncated half-space.

Vertex-centered conservative scheme on a tensor grid: horizontal axes span
[-L, L] with nx nodes each (trace dimension d in {1, 2}), the vertical axis
holds ny graded layers y_j = Y (j/ny)^p plus the trace row y = 0.  Face
conductances use exact cell averages of y^a; the face touching the trace is
matched to the boundary expansion v = v(.,0) + c1 y^{2s} + o(y^{2s}), which
is what makes the weighted normal derivative consistent for a != 0.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .core import FracParams
from .errors import ConfigurationError, ConvergenceError

try:
    import pyamg

    _HAVE_PYAMG = True
except ImportError:  # pragma: no cover
    _HAVE_PYAMG = False

_SNAP_MAGIC = b"XHSG"
_SNAP_VERSION = 1


@dataclass(frozen=True)
class GridConfig:
    """Geometry of the truncated upper half-space."""

    d: int = 1
    L: float = 1.0
    Y: float = 1.0
    nx: int = 65
    ny: int = 32
    grading_p: float | None = None  # None -> default grading for the given s


def default_grading(params: FracParams) -> float:
    """Vertical grading exponent for the y = 0 boundary layer.

    The matched trace stencil carries an O(y1^{2-2s}) error from the regular
    y^2 part of the boundary expansion, which p = 2/(1+a) = 1/(1-s) turns
    into O(ny^-2); interpolating the y^{2s} layer itself needs p = 1/s.  The
    default covers both, capped so node spacings stay representable for
    extreme orders.
    """
    s = params.s
    return min(8.0, max(1.0, 1.0 / (1.0 - s), 1.0 / s))


@dataclass(frozen=True)
class HalfSpaceGrid:
    d: int
    L: float
    Y: float
    nx: int
    ny: int
    grading_p: float
    params: FracParams
    x: np.ndarray  # (nx,) horizontal nodes, shared by both axes when d = 2
    y: np.ndarray  # (ny+1,) vertical levels, y[0] = 0, y[ny] = Y
    face_w: np.ndarray  # (ny,) exact average of y^a over [y_j, y_{j+1}]

    @property
    def dx(self) -> float:
        return self.x[1] - self.x[0]

    @property
    def shape(self) -> tuple:
        return (self.nx,) * self.d + (self.ny + 1,)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def dy(self) -> np.ndarray:
        return np.diff(self.y)

    @cached_property
    def x_dual(self) -> np.ndarray:
        """Dual (control-volume) lengths per horizontal node."""
        h = np.full(self.nx, self.dx)
        h[0] = h[-1] = 0.5 * self.dx
        return h

    @cached_property
    def y_dual_edges(self) -> np.ndarray:
        """(ny+2,) edges of the vertical dual cells."""
        mid = 0.5 * (self.y[:-1] + self.y[1:])
        return np.concatenate(([0.0], mid, [self.Y]))

    @cached_property
    def y_dual_len(self) -> np.ndarray:
        return np.diff(self.y_dual_edges)

    @cached_property
    def y_dual_w(self) -> np.ndarray:
        """Integral of y^a over each vertical dual cell (exact)."""
        return _pow_integral(self.y_dual_edges[:-1], self.y_dual_edges[1:], self.params.a)

    @cached_property
    def vertical_conductance(self) -> np.ndarray:
        """(ny,) conductance per unit horizontal measure across level faces.

        Face 0 (trace to first layer) is matched to the y^{2s} expansion;
        the flux y^a d_y (c0 + c1 y^{2s}) = 2s c1 is exact on it.
        """
        s = self.params.s
        g = self.face_w / self.dy
        g = g.copy()
        g[0] = 2.0 * s * self.y[1] ** (-2.0 * s)
        return g

    @cached_property
    def node_volume(self) -> np.ndarray:
        """Plain (unweighted) dual volume of every node, grid-shaped."""
        hx = self.x_dual
        if self.d == 1:
            return hx[:, None] * self.y_dual_len[None, :]
        return hx[:, None, None] * hx[None, :, None] * self.y_dual_len[None, None, :]

    @cached_property
    def operator(self) -> sps.csr_matrix:
        return assemble_La(self)


def _pow_integral(lo, hi, a):
    """Exact integral of y^a over [lo, hi], elementwise (a > -1)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (hi ** (1.0 + a) - lo ** (1.0 + a)) / (1.0 + a)


def build_grid(config: GridConfig, params: FracParams) -> HalfSpaceGrid:
    """Construct the graded tensor grid with exact cell-averaged face weights."""
    if config.d not in (1, 2):
        raise ConfigurationError(f"trace dimension d must be 1 or 2, got {config.d}")
    if config.nx < 4 or config.ny < 4:
        raise ConfigurationError("nx and ny must both be >= 4")
    if not (config.L > 0 and config.Y > 0):
        raise ConfigurationError("L and Y must be positive")
    p = config.grading_p if config.grading_p is not None else default_grading(params)
    if p < 1.0:
        raise ConfigurationError("grading exponent must satisfy p >= 1")
    x = np.linspace(-config.L, config.L, config.nx)
    j = np.arange(config.ny + 1, dtype=float)
    y = config.Y * (j / config.ny) ** p
    if np.any(np.diff(y) <= 0):
        raise ConfigurationError(
            "vertical grading underflows the node spacing; lower grading_p")
    face_w = _pow_integral(y[:-1], y[1:], params.a) / np.diff(y)
    if not np.all(np.isfinite(face_w)) or np.any(face_w <= 0):
        raise ConfigurationError("degenerate vertical grading: non-positive face weight")
    return HalfSpaceGrid(
        d=config.d, L=config.L, Y=config.Y, nx=config.nx, ny=config.ny,
        grading_p=p, params=params, x=x, y=y, face_w=face_w,
    )


@dataclass
class Field:
    """Nodal values on a HalfSpaceGrid, including the y = 0 trace row."""

    grid: HalfSpaceGrid
    values: np.ndarray
    component: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains NaN or Inf")

    @property
    def trace(self) -> np.ndarray:
        return self.values[..., 0]

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.component)


def field_from_function(grid: HalfSpaceGrid, fn, component: int = 0) -> Field:
    """Sample fn(x1[, x2], y) on the grid nodes (broadcasting arrays)."""
    coords = grid_coordinates(grid)
    vals = np.broadcast_to(np.asarray(fn(*coords), dtype=float), grid.shape)
    return Field(grid, vals.copy(), component)


def grid_coordinates(grid: HalfSpaceGrid):
    """Broadcastable node coordinate arrays (x1[, x2], y)."""
    if grid.d == 1:
        return grid.x[:, None], grid.y[None, :]
    return (grid.x[:, None, None], grid.x[None, :, None], grid.y[None, None, :])


def interpolate_field(fld: Field, *coords) -> np.ndarray:
    """Multilinear interpolation of nodal values at arbitrary points.

    coords are (x1[, x2], y) arrays of a common shape; points must lie inside
    the grid box (they are clamped to it).
    """
    grid = fld.grid
    v = fld.values
    axes = [grid.x] * grid.d + [grid.y]
    idx, frac = [], []
    for c, ax in zip(coords, axes):
        c = np.asarray(c, dtype=float)
        i = np.clip(np.searchsorted(ax, c) - 1, 0, ax.size - 2)
        idx.append(i)
        frac.append(np.clip((c - ax[i]) / (ax[i + 1] - ax[i]), 0.0, 1.0))
    out = 0.0
    for corner in range(2 ** (grid.d + 1)):
        weight = 1.0
        pos = []
        for axis in range(grid.d + 1):
            hi = (corner >> axis) & 1
            weight = weight * (frac[axis] if hi else (1.0 - frac[axis]))
            pos.append(idx[axis] + hi)
        out = out + weight * v[tuple(pos)]
    return out


def assemble_La(grid: HalfSpaceGrid) -> sps.csr_matrix:
    """Assemble the conservative flux form of L_a over all nodes.

    Symmetric positive semidefinite; every row sums to zero, so constants are
    in the kernel.  Entry (p, q) couples face-adjacent nodes with the face
    conductance; Dirichlet conditions are applied at solve time.
    """
    shape = grid.shape
    nn = grid.n_nodes
    idx = np.arange(nn).reshape(shape)
    hx = grid.x_dual
    rows, cols, vals = [], [], []

    def add_faces(p, q, g):
        rows.append(p.ravel())
        cols.append(q.ravel())
        vals.append(-g.ravel())
        rows.append(q.ravel())
        cols.append(p.ravel())
        vals.append(-g.ravel())

    gv = grid.vertical_conductance  # per unit horizontal measure
    if grid.d == 1:
        # vertical faces
        p = idx[:, :-1]
        q = idx[:, 1:]
        g = hx[:, None] * gv[None, :]
        add_faces(p, q, g)
        # horizontal faces
        p = idx[:-1, :]
        q = idx[1:, :]
        g = np.broadcast_to(grid.y_dual_w[None, :] / grid.dx, p.shape)
        add_faces(p, q, g)
    else:
        harea = hx[:, None] * hx[None, :]
        # vertical faces
        p = idx[:, :, :-1]
        q = idx[:, :, 1:]
        g = harea[:, :, None] * gv[None, None, :]
        add_faces(p, q, g)
        # horizontal faces along axis 1
        p = idx[:-1, :, :]
        q = idx[1:, :, :]
        g = np.broadcast_to(
            hx[None, :, None] * grid.y_dual_w[None, None, :] / grid.dx, p.shape)
        add_faces(p, q, g)
        # horizontal faces along axis 2
        p = idx[:, :-1, :]
        q = idx[:, 1:, :]
        g = np.broadcast_to(
            hx[:, None, None] * grid.y_dual_w[None, None, :] / grid.dx, p.shape)
        add_faces(p, q, g)

    off = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nn, nn),
    ).tocsr()
    # diagonal = minus the row sums, so constants are annihilated exactly
    diag = -np.asarray(off @ np.ones(nn))
    return (off + sps.diags(diag)).tocsr()


def apply_operator(grid: HalfSpaceGrid, fld: Field) -> np.ndarray:
    """Pointwise residual (A v) / dual-volume, grid-shaped.

    Approximates L_a v at the nodes; exactly zero on constants and on fields
    linear in a horizontal coordinate (interior rows).
    """
    r = grid.operator @ fld.values.ravel()
    return (r / grid.node_volume.ravel()).reshape(grid.shape)


def interior_residual(grid: HalfSpaceGrid, fld: Field) -> np.ndarray:
    """apply_operator restricted to strictly interior nodes."""
    r = apply_operator(grid, fld)
    sl = (slice(1, -1),) * grid.d + (slice(1, -1),)
    return r[sl]


def dtn_trace(grid: HalfSpaceGrid, fld: Field) -> np.ndarray:
    """Weighted Dirichlet-to-Neumann trace -2s (v(., y1) - v(., 0)) / y1^{2s}.

    One-sided difference matched to the boundary expansion; exact on fields
    of the form c0(x) + c1(x) y^{2s}.
    """
    s = grid.params.s
    y1 = grid.y[1]
    return -2.0 * s * (fld.values[..., 1] - fld.values[..., 0]) / y1 ** (2.0 * s)


# --------------------------------------------------------------------------
# boundary data and the linear solve
# --------------------------------------------------------------------------

def _materialize(value, coords):
    """Evaluate a scalar / array / callable(x1[, x2], y) boundary spec."""
    if callable(value):
        out = value(*coords)
    else:
        out = value
    return np.broadcast_to(np.asarray(out, dtype=float),
                           np.broadcast_shapes(*[np.shape(c) for c in coords])).copy()


@dataclass
class BoundaryData:
    """Boundary specification for the linear extension solve.

    top / sides are Dirichlet values (scalar, array, or callable of the node
    coordinates); sides=None selects zero-flux lateral walls instead.  The
    y = 0 row takes either the affine Neumann pair (g0, m), imposing
    d_nu^a v = g0 - m v with m >= 0, or explicit Dirichlet trace values.
    """

    top: object = 0.0
    sides: object | None = 0.0
    neumann_g0: object = 0.0
    neumann_m: object = 0.0
    trace_dirichlet: object | None = None


def _boundary_masks(grid: HalfSpaceGrid, bdata: BoundaryData):
    """Dirichlet mask and value array for the full node set."""
    shape = grid.shape
    dmask = np.zeros(shape, dtype=bool)
    dvals = np.zeros(shape)
    coords = grid_coordinates(grid)

    if bdata.sides is not None:
        for axis in range(grid.d):
            for edge in (0, -1):
                sl = [slice(None)] * (grid.d + 1)
                sl[axis] = edge
                sl = tuple(sl)
                cc = [np.broadcast_to(c, shape)[sl] for c in coords]
                dmask[sl] = True
                dvals[sl] = _materialize(bdata.sides, cc)

    sl = (slice(None),) * grid.d + (-1,)
    cc = [np.broadcast_to(c, shape)[sl] for c in coords]
    dmask[sl] = True
    dvals[sl] = _materialize(bdata.top, cc)

    if bdata.trace_dirichlet is not None:
        sl = (slice(None),) * grid.d + (0,)
        cc = [np.broadcast_to(c, shape)[sl] for c in coords]
        dmask[sl] = True
        dvals[sl] = _materialize(bdata.trace_dirichlet, cc)

    return dmask, dvals


def _trace_area(grid: HalfSpaceGrid) -> np.ndarray:
    """Horizontal dual measure of each trace node."""
    hx = grid.x_dual
    if grid.d == 1:
        return hx.copy()
    return hx[:, None] * hx[None, :]


@dataclass
class SolveStats:
    method: str
    iterations: int
    residual: float


def _solve_spd(A: sps.csr_matrix, b: np.ndarray, tol: float, maxiter: int | None,
               method: str = "auto"):
    """Solve the SPD system, direct for small problems, AMG-PCG otherwise.

    The system is symmetrically Jacobi-equilibrated first; the matched trace
    conductance scales like y1^{-2s}, which would otherwise dominate both the
    pivoting and the residual norm.
    """
    n = A.shape[0]
    if maxiter is None:
        maxiter = int(20 * math.sqrt(n)) + 200
    if float(np.linalg.norm(b)) == 0.0:
        return np.zeros(n), SolveStats("trivial", 0, 0.0)
    d = A.diagonal()
    if np.any(d <= 0):
        raise ConvergenceError("operator lost positive diagonal")
    dhalf = 1.0 / np.sqrt(d)
    D = sps.diags(dhalf)
    As = (D @ A @ D).tocsr()
    bs = dhalf * b
    bnorm = float(np.linalg.norm(bs))

    if method == "auto":
        method = "direct" if n <= 150_000 else "pcg"
    if method == "direct":
        xs = spla.splu(As.tocsc()).solve(bs)
        res = float(np.linalg.norm(As @ xs - bs)) / bnorm
        if not np.isfinite(res) or res > max(tol * 100, 1e-8):
            raise ConvergenceError("direct solve failed", residual=res)
        return dhalf * xs, SolveStats("direct", 1, res)

    if _HAVE_PYAMG:
        ml = pyamg.smoothed_aggregation_solver(As, symmetry="symmetric",
                                               max_coarse=64)
        M = ml.aspreconditioner(cycle="V")
    else:  # pragma: no cover
        M = None
    it = 0

    def _cb(_):
        nonlocal it
        it += 1

    xs, info = spla.cg(As, bs, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=_cb)
    res = float(np.linalg.norm(As @ xs - bs)) / bnorm
    if info != 0 or not np.isfinite(res):
        raise ConvergenceError(
            f"PCG failed to reach tol={tol} within {maxiter} iterations",
            residual=res, iterations=it)
    return dhalf * xs, SolveStats("pcg", it, res)


def solve_linear(grid: HalfSpaceGrid, bdata: BoundaryData, tol: float = 1e-10,
                 maxiter: int | None = None, method: str = "auto") -> Field:
    """Solve L_a v = 0 with the given boundary data.

    The bottom-row equations impose the Neumann flux through the matched
    trace stencil; with m >= 0 the reduced system is an M-matrix, so
    nonnegative data yields a nonnegative solution.
    """
    dmask, dvals = _boundary_masks(grid, bdata)
    trace_is_neumann = bdata.trace_dirichlet is None

    A = grid.operator
    flat_mask = dmask.ravel()
    unk = np.flatnonzero(~flat_mask)
    dir_ = np.flatnonzero(flat_mask)
    if unk.size == 0:
        return Field(grid, dvals)

    A_uu = A[unk][:, unk].tocsr()
    rhs = -A[unk][:, dir_] @ dvals.ravel()[dir_]

    if trace_is_neumann:
        coords = grid_coordinates(grid)
        sl = (slice(None),) * grid.d + (0,)
        cc = [np.broadcast_to(c, grid.shape)[sl] for c in coords]
        g0 = _materialize(bdata.neumann_g0, cc)
        m = _materialize(bdata.neumann_m, cc)
        if np.any(m < 0):
            raise ConfigurationError("absorption coefficient m must be >= 0")
        area = _trace_area(grid)
        # map trace nodes into the unknown numbering
        pos = np.full(grid.n_nodes, -1, dtype=np.int64)
        pos[unk] = np.arange(unk.size)
        tr_idx = np.arange(grid.n_nodes).reshape(grid.shape)[sl].ravel()
        keep = pos[tr_idx] >= 0
        rows = pos[tr_idx][keep]
        A_uu = (A_uu + sps.coo_matrix(
            ((m.ravel() * area.ravel())[keep], (rows, rows)),
            shape=A_uu.shape)).tocsr()
        bump = np.zeros(unk.size)
        bump[rows] = (g0.ravel() * area.ravel())[keep]
        rhs = rhs + bump

    sol, _ = _solve_spd(A_uu, rhs, tol=tol, maxiter=maxiter, method=method)
    full = dvals.ravel().copy()
    full[unk] = sol
    return Field(grid, full.reshape(grid.shape))


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_snapshot(path: str, fields: list[Field]) -> None:
    """Serialize fields to the flat binary layout (header + row-major f64)."""
    if not fields:
        raise ValueError("nothing to write")
    grid = fields[0].grid
    header = struct.pack(
        "<4sIIIIIdddd", _SNAP_MAGIC, _SNAP_VERSION, grid.d, grid.nx, grid.ny,
        len(fields), grid.L, grid.Y, grid.grading_p, grid.params.s,
    ) + struct.pack("<I", grid.params.N)
    payload = b"".join(np.ascontiguousarray(f.values, dtype="<f8").tobytes()
                       for f in fields)
    atomic_write_bytes(path, header + payload)


def read_snapshot(path: str) -> list[Field]:
    with open(path, "rb") as fh:
        raw = fh.read()
    head_fmt = "<4sIIIIIdddd"
    head_size = struct.calcsize(head_fmt)
    magic, version, d, nx, ny, k, L, Y, p, s = struct.unpack_from(head_fmt, raw)
    (N,) = struct.unpack_from("<I", raw, head_size)
    if magic != _SNAP_MAGIC or version != _SNAP_VERSION:
        raise ValueError(f"{path} is not a field snapshot")
    grid = build_grid(GridConfig(d=d, L=L, Y=Y, nx=nx, ny=ny, grading_p=p),
                      FracParams(s=s, N=N))
    offset = head_size + 4
    n = grid.n_nodes
    fields = []
    for ci in range(k):
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=offset + ci * n * 8)
        fields.append(Field(grid, arr.reshape(grid.shape).copy(), component=ci))
    return fields


def snapshot_csv(fields: list[Field]) -> str:
    """Node table (coordinates plus one column per component) for small grids."""
    grid = fields[0].grid
    if grid.n_nodes > 200_000:
        raise ValueError("snapshot CSV is intended for small grids")
    coords = [np.broadcast_to(c, grid.shape).ravel()
              for c in grid_coordinates(grid)]
    names = ["x1", "y"] if grid.d == 1 else ["x1", "x2", "y"]
    cols = coords + [f.values.ravel() for f in fields]
    names += [f"v{f.component}" for f in fields]
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(format(v, ".12g") for v in row))
    return "\n".join(lines) + "\n"

"""Conforming P1 finite elements on the unit interval and the unit square.

Only interior vertices carry degrees of freedom (homogeneous Dirichlet
conditions), so every matrix and coefficient vector below lives on the
interior dofs.  Data functions are called as ``f(x)`` in 1D and ``f(x, y)`` in
2D with array arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import AssemblyError, DataError, DomainError, SolverError
from .frac_ops import gauss_jacobi
from .kernels import simplex_matrices

_LOCATE_EPS = 1e-12


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# {{{ meshes


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh of the unit interval or unit square.

    ``n`` is the number of cells per side for the structured generators
    (``None`` for meshes built from raw arrays); structured meshes get O(1)
    point location and are nested under integer refinement.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    n: int | None = None

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise DomainError(f"only 1D and 2D meshes are supported, got {self.dim}")
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, self.dim)
        elems = np.asarray(self.elements, dtype=np.int64)
        if elems.ndim != 2 or elems.shape[1] != self.dim + 1:
            raise DomainError("elements must list dim + 1 vertices each")
        if elems.size and (elems.min() < 0 or elems.max() >= len(verts)):
            raise DomainError("element vertex index out of range")
        bnd = np.asarray(self.boundary, dtype=bool)
        if bnd.shape != (len(verts),):
            raise DomainError("boundary flags must have one entry per vertex")
        object.__setattr__(self, "vertices", _readonly(verts, np.float64))
        object.__setattr__(self, "elements", _readonly(elems, np.int64))
        object.__setattr__(self, "boundary", _readonly(bnd, bool))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def h(self) -> float:
        """Largest element diameter."""
        v = self.vertices[self.elements]
        diam = 0.0
        for a in range(self.dim + 1):
            for b in range(a + 1, self.dim + 1):
                diam = max(diam, float(np.max(np.linalg.norm(v[:, a] - v[:, b], axis=1))))
        return diam

    @property
    def cell_size(self) -> float:
        """Side length ``1/n`` of the structured cells (the dyadic level)."""
        if self.n is None:
            raise DomainError("cell size is only defined for structured meshes")
        return 1.0 / self.n

    def is_refinement_of(self, coarse: "Mesh") -> bool:
        return (self.n is not None and coarse.n is not None
                and self.dim == coarse.dim and self.n % coarse.n == 0)

    def locate(self, points):
        """Containing element and barycentric coordinates of each point.

        Points on shared edges or vertices go to the lowest-index element.
        Returns ``(elements, bary)`` with shapes ``(P,)`` and ``(P, dim+1)``;
        raises :class:`DomainError` for points outside the mesh.
        """
        pts = np.asarray(points, dtype=np.float64).reshape(-1, self.dim)
        if self.n is not None:
            cand = self._structured_candidates(pts)
        else:
            cand = np.broadcast_to(np.arange(self.num_elements), (len(pts), self.num_elements))
        bary = _barycentric(self.vertices, self.elements[cand], pts)
        inside = bary.min(axis=2) >= -_LOCATE_EPS
        if not np.all(inside.any(axis=1)):
            raise DomainError("point outside the mesh")
        # candidates are sorted by element index, so argmax picks the lowest
        first = np.argmax(inside, axis=1)
        rows = np.arange(len(pts))
        return cand[rows, first], np.clip(bary[rows, first], 0.0, 1.0)

    def _structured_candidates(self, pts):
        n = self.n
        c = np.clip(np.floor(pts * n).astype(np.int64), 0, n - 1)
        lo = np.clip(c - 1, 0, n - 1)
        if self.dim == 1:
            cand = np.stack([lo[:, 0], c[:, 0]], axis=1)
        else:
            sq = []
            for iy in (lo[:, 1], c[:, 1]):
                for ix in (lo[:, 0], c[:, 0]):
                    s = iy * n + ix
                    sq.extend([2 * s, 2 * s + 1])
            cand = np.stack(sq, axis=1)
        return np.sort(cand, axis=1)


def _barycentric(vertices, elems, pts):
    # elems: (P, C, d+1); pts: (P, d) -> (P, C, d+1)
    v = vertices[elems]                               # (P, C, d+1, d)
    v0 = v[:, :, 0, :]
    jac = np.swapaxes(v[:, :, 1:, :] - v0[:, :, None, :], 2, 3)  # (P, C, d, d)
    rhs = pts[:, None, :] - v0
    lam = np.linalg.solve(jac, rhs[..., None])[..., 0]
    return np.concatenate([1.0 - lam.sum(axis=2, keepdims=True), lam], axis=2)


def build_interval_mesh(n: int) -> Mesh:
    """Uniform mesh of ``(0, 1)`` with ``n`` cells."""
    if int(n) != n or n < 2:
        raise DomainError(f"need at least 2 cells, got {n}")
    n = int(n)
    verts = np.linspace(0.0, 1.0, n + 1)[:, None]
    elems = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    bnd = np.zeros(n + 1, dtype=bool)
    bnd[[0, n]] = True
    return Mesh(1, verts, elems, bnd, n)


def build_square_mesh(n: int) -> Mesh:
    """Uniform mesh of ``(0, 1)^2``: ``n x n`` squares, each cut along its
    lower-left to upper-right diagonal into two counterclockwise triangles."""
    if int(n) != n or n < 2:
        raise DomainError(f"need at least 2 cells per side, got {n}")
    n = int(n)
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g)  # vertex (ix, iy) has index iy * (n + 1) + ix
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    iy, ix = np.divmod(np.arange(n * n), n)
    v00 = iy * (n + 1) + ix
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    elems = np.empty((2 * n * n, 3), dtype=np.int64)
    elems[0::2] = np.stack([v00, v10, v11], axis=1)
    elems[1::2] = np.stack([v00, v11, v01], axis=1)
    vx, vy = divmod(np.arange((n + 1) ** 2), n + 1)
    bnd = (vx == 0) | (vx == n) | (vy == 0) | (vy == n)
    return Mesh(2, verts, elems, bnd, n)


# }}}

# {{{ element quadrature


def _gauss_legendre01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def reference_rule(dim: int, order: int = 8):
    """Barycentric points ``(Q, dim+1)`` and weights summing to 1 on the
    reference simplex (Gauss-Legendre in 1D, collapsed Gauss in 2D)."""
    u, wu = _gauss_legendre01(order)
    if dim == 1:
        return np.stack([1.0 - u, u], axis=1), wu
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu) * (1.0 - U)
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    return np.stack([1.0 - x - y, x, y], axis=1), 2.0 * W.ravel()


# }}}

# {{{ function spaces


@dataclass(frozen=True, eq=False)
class FemSpace:
    """P1 space on ``mesh`` with homogeneous Dirichlet conditions.

    ``mass`` and ``stiffness`` are CSR matrices on the ``N`` interior dofs;
    ``dofs[k]`` is the mesh vertex of dof ``k`` and ``dof_of_vertex`` maps
    back (``-1`` on the boundary).
    """

    mesh: Mesh
    dofs: np.ndarray
    dof_of_vertex: np.ndarray
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    element_volume: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.dofs.shape[0]

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @cached_property
    def mass_factor(self):
        return splu(self.mass.tocsc())

    def coordinates(self) -> np.ndarray:
        """Coordinates of the interior dofs, shape ``(N, dim)``."""
        return self.mesh.vertices[self.dofs]

    def l2_norm(self, c) -> float:
        c = np.asarray(c, dtype=np.float64)
        return math.sqrt(max(float(c @ (self.mass @ c)), 0.0))

    def energy_norm(self, c) -> float:
        c = np.asarray(c, dtype=np.float64)
        return math.sqrt(max(float(c @ (self.stiffness @ c)), 0.0))

    def solve_mass(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        c = self.mass_factor.solve(b)
        res = np.linalg.norm(self.mass @ c - b)
        scale = np.linalg.norm(b)
        if not np.isfinite(res) or res > 1e-12 * max(scale, 1e-300):
            raise SolverError("mass solve missed its tolerance", residual=float(res))
        return c

    def evaluate(self, c, points) -> np.ndarray:
        """Evaluate the finite element function with coefficients ``c``."""
        c = np.asarray(c, dtype=np.float64)
        pts = np.asarray(points, dtype=np.float64).reshape(-1, self.dim)
        el, bary = self.mesh.locate(pts)
        full = self.extend(c)
        return np.einsum("pk,pk->p", bary, full[self.mesh.elements[el]])

    def extend(self, c) -> np.ndarray:
        """Vertex values with zeros on the boundary."""
        full = np.zeros(self.mesh.num_vertices)
        full[self.dofs] = c
        return full


def assemble(mesh: Mesh) -> FemSpace:
    """Assemble P1 mass and stiffness matrices restricted to interior dofs."""
    mass_loc, stiff_loc, measure = simplex_matrices(mesh.vertices, mesh.elements)
    if np.any(measure == 0) or not np.all(np.isfinite(measure)):
        bad = int(np.flatnonzero(~(np.abs(measure) > 0))[0])
        raise AssemblyError(f"element {bad} has zero measure")
    if mesh.dim == 2 and np.any(measure < 0):
        raise AssemblyError("triangles must be counterclockwise")

    nv = mesh.num_vertices
    el = mesh.elements
    k = mesh.dim + 1
    rows = np.repeat(el, k, axis=1).ravel()
    cols = np.tile(el, (1, k)).ravel()
    M = sp.csr_matrix((mass_loc.ravel(), (rows, cols)), shape=(nv, nv))
    A = sp.csr_matrix((stiff_loc.ravel(), (rows, cols)), shape=(nv, nv))

    dofs = np.flatnonzero(~mesh.boundary)
    if dofs.size == 0:
        raise AssemblyError("mesh has no interior vertices")
    dof_of_vertex = np.full(nv, -1, dtype=np.int64)
    dof_of_vertex[dofs] = np.arange(dofs.size)
    Mi = M[dofs][:, dofs].tocsr()
    Ai = A[dofs][:, dofs].tocsr()
    # symmetrize away round-off from the element sums
    Mi = ((Mi + Mi.T) * 0.5).tocsr()
    Ai = ((Ai + Ai.T) * 0.5).tocsr()
    return FemSpace(mesh, _readonly(dofs, np.int64), _readonly(dof_of_vertex, np.int64),
                    Mi, Ai, _readonly(np.abs(measure), np.float64))


# }}}

# {{{ load vectors and projections


def _scatter(space, elem_vals):
    # elem_vals: (E, d+1) integrals against the local hats -> interior dofs
    full = np.bincount(space.mesh.elements.ravel(), weights=elem_vals.ravel(),
                       minlength=space.mesh.num_vertices)
    return full[space.dofs]


def _call(f, pts):
    val = np.asarray(f(*pts.T), dtype=np.float64)
    return np.broadcast_to(val, pts.shape[:1])


def load_vector(space: FemSpace, f, singular_exponent: float = 0.0,
                order: int = 8) -> np.ndarray:
    r"""Entries :math:`\int_\Omega f \varphi_k` for the interior hats.

    A nonzero ``singular_exponent`` ``q`` (1D only) declares that ``f``
    behaves like :math:`x^q g(x)` near ``x = 0``; the factor :math:`x^q` is
    then folded into a Gauss-Jacobi rule on the cell touching the origin.
    """
    mesh = space.mesh
    bary, w = reference_rule(mesh.dim, order)
    verts = mesh.vertices[mesh.elements]                 # (E, d+1, d)
    pts = np.einsum("qk,ekd->eqd", bary, verts)          # (E, Q, d)
    vals = _call(f, pts.reshape(-1, mesh.dim)).reshape(pts.shape[:2])
    elem = np.einsum("eq,q,qk->ek", vals, w, bary) * space.element_volume[:, None]

    if singular_exponent != 0.0:
        if mesh.dim != 1:
            raise DomainError("singular exponents are supported in 1D only")
        first = np.flatnonzero(np.isclose(verts[:, :, 0].min(axis=1), 0.0))
        for e in first:
            a, b = np.sort(verts[e, :, 0])
            s, ws = gauss_jacobi(order, a, b, 0.0, singular_exponent)
            g = _call(f, s[:, None]) / s**singular_exponent
            lam_b = (s - a) / (b - a)
            x0, x1 = verts[e, :, 0]
            # local hat attached to the first listed vertex decreases from it
            lam = np.stack([1.0 - lam_b, lam_b], axis=1) if x0 < x1 else \
                np.stack([lam_b, 1.0 - lam_b], axis=1)
            elem[e] = (ws * g) @ lam

    if not np.all(np.isfinite(elem)):
        raise DataError("load quadrature produced non-finite values")
    return _scatter(space, elem)


def interpolate(space: FemSpace, f) -> np.ndarray:
    """Nodal interpolant: ``f`` sampled at the interior vertices."""
    vals = _call(f, space.coordinates())
    if not np.all(np.isfinite(vals)):
        raise DataError("interpolated function is not finite at the nodes")
    return np.array(vals)


def l2_project(space: FemSpace, v, singular_exponent: float = 0.0,
               order: int = 8) -> np.ndarray:
    """Coefficients of the L2-orthogonal projection of ``v`` onto the space."""
    return space.solve_mass(load_vector(space, v, singular_exponent, order))


# }}}

# {{{ discrete Dirac delta


@dataclass(frozen=True)
class LocalDirac:
    r"""The P1 function :math:`\delta_{x_0,h}` on one element.

    It is supported on ``element`` and reproduces point values of linear
    functions there: :math:`\int_K \delta_{x_0,h} q = q(x_0)`.
    ``coefficients`` are its values at the element vertices.
    """

    space: FemSpace = field(repr=False)
    point: tuple
    element: int
    barycentric: np.ndarray
    coefficients: np.ndarray

    @property
    def vertices(self) -> np.ndarray:
        return self.space.mesh.elements[self.element]

    def moment_vector(self) -> np.ndarray:
        r"""Entries :math:`\langle \delta_{x_0,h}, \varphi_k\rangle = \varphi_k(x_0)`."""
        full = np.zeros(self.space.mesh.num_vertices)
        full[self.vertices] = self.barycentric
        return full[self.space.dofs]

    def local_mass(self) -> np.ndarray:
        d = self.space.dim
        base = np.ones((d + 1, d + 1)) + np.eye(d + 1)
        return self.space.element_volume[self.element] * base / ((d + 1) * (d + 2))

    def l2_norm(self) -> float:
        c = self.coefficients
        return math.sqrt(float(c @ self.local_mass() @ c))

    def integrate(self, q) -> float:
        """Exact integral of the product with a linear function ``q``."""
        mesh = self.space.mesh
        verts = mesh.vertices[self.vertices]
        qv = _call(q, verts)
        # product of two linears: mass matrix of the element is exact
        return float(self.coefficients @ self.local_mass() @ qv)


def dirac_approx(space: FemSpace, x0) -> LocalDirac:
    """Build :math:`\\delta_{x_0,h}` by solving the local mass system."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape != (space.dim,):
        raise DomainError(f"point must have {space.dim} coordinates")
    if np.any(x0 <= 0.0) or np.any(x0 >= 1.0):
        raise DomainError(f"point {tuple(x0)} is not interior to the domain")
    el, bary = space.mesh.locate(x0[None, :])
    d = space.dim
    base = np.ones((d + 1, d + 1)) + np.eye(d + 1)
    mloc = space.element_volume[el[0]] * base / ((d + 1) * (d + 2))
    coef = np.linalg.solve(mloc, bary[0])
    return LocalDirac(space, tuple(float(p) for p in x0), int(el[0]),
                      _readonly(bary[0], np.float64), _readonly(coef, np.float64))


# }}}

# {{{ space-time loads


def load_slab(space: FemSpace, f, slab, time_exponent: float = 0.0,
              space_exponent: float = 0.0, time_points: int = 8,
              order: int = 8) -> np.ndarray:
    r"""Entries :math:`\int_{I}\int_\Omega f(t, x) \varphi_k\,dx\,dt`.

    ``f`` is called as ``f(t, x)`` or ``f(t, x, y)`` with scalar ``t``.  If
    the slab starts at 0 and ``time_exponent`` ``q`` is nonzero, ``f`` is
    taken to behave like :math:`t^q` there and a Gauss-Jacobi rule carries
    the factor; otherwise Gauss-Legendre nodes are used in time.
    """
    lo, hi = map(float, slab)
    if not hi > lo >= 0:
        raise DomainError(f"invalid slab ({lo}, {hi})")
    q = time_exponent if lo == 0.0 else 0.0
    s, w = gauss_jacobi(time_points, lo, hi, 0.0, q)
    out = np.zeros(space.N)
    for sk, wk in zip(s, w):
        scale = wk / sk**q if q else wk
        out += scale * load_vector(space, lambda *x, _t=sk: f(_t, *x),
                                   space_exponent, order)
    if not np.all(np.isfinite(out)):
        raise DataError("slab load quadrature produced non-finite values")
    return out


# }}}

# {{{ transfer between nested spaces


def prolongation_matrix(coarse: FemSpace, fine: FemSpace) -> sp.csr_matrix:
    """Sparse ``(fine.N, coarse.N)`` matrix of P1 interpolation onto ``fine``."""
    if coarse is fine:
        return sp.identity(coarse.N, format="csr")
    if not fine.mesh.is_refinement_of(coarse.mesh):
        raise DomainError("fine mesh is not a nested refinement of the coarse mesh")
    el, bary = coarse.mesh.locate(fine.coordinates())
    verts = coarse.mesh.elements[el]                      # (Nf, d+1)
    cols = coarse.dof_of_vertex[verts]
    rows = np.repeat(np.arange(fine.N), verts.shape[1]).reshape(verts.shape)
    keep = (cols >= 0) & (bary > _LOCATE_EPS)
    P = sp.csr_matrix((bary[keep], (rows[keep], cols[keep])),
                      shape=(fine.N, coarse.N))
    return P


# }}}

__all__ = [
    "FemSpace",
    "LocalDirac",
    "Mesh",
    "assemble",
    "build_interval_mesh",
    "build_square_mesh",
    "dirac_approx",
    "interpolate",
    "l2_project",
    "load_slab",
    "load_vector",
    "prolongation_matrix",
    "reference_rule",
]

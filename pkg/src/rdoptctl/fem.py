"""P1 finite elements: fields, exact element matrices, SPD solves.

Every matrix assembled for a given mesh shares one CSR sparsity pattern, so
time steppers can combine them by adding ``.data`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import InvalidArgumentError, SolverFailureError
from .mesh import Mesh

SOLVE_RTOL = 1e-10
_pbsv = scipy.linalg.get_lapack_funcs("pbsv", dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FeField:
    """Nodal coefficients of a P1 function on ``mesh``."""

    mesh: Mesh
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape != (self.mesh.n_nodes,):
            raise InvalidArgumentError(
                f"field has {c.size} coefficients, mesh has {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("field coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, mesh, value):
        return cls(mesh, np.full(mesh.n_nodes, float(value)))

    @classmethod
    def interpolate(cls, mesh, func):
        """Nodal interpolant of ``func(x)`` (1D) or ``func(x, y)`` (2D)."""
        return cls(mesh, func(*mesh.nodes.T))


class DiffusionField:
    """Element-wise constant diffusion coefficient, bounded below by ``theta``.

    Parameters
    ----------
    values : float or array_like
        One scalar for a uniform field, or one value per element.
    theta : float
        Required lower bound; every value must be >= theta > 0.
    """

    def __init__(self, values, theta=1e-12):
        if not (theta > 0 and math.isfinite(theta)):
            raise InvalidArgumentError("theta must be positive")
        v = np.array(values, dtype=float)
        if v.ndim > 1:
            raise InvalidArgumentError("diffusion must be a scalar or a 1D array")
        if not np.all(np.isfinite(v)) or np.any(v < theta):
            raise InvalidArgumentError(f"diffusion must be finite and >= theta={theta}")
        v.flags.writeable = False
        self.values = v
        self.theta = theta

    @property
    def is_uniform(self):
        return self.values.ndim == 0 or bool(np.all(self.values == self.values.flat[0]))

    def per_element(self, mesh):
        if self.values.ndim == 0:
            return np.full(mesh.n_elements, float(self.values))
        if self.values.shape != (mesh.n_elements,):
            raise InvalidArgumentError(
                f"diffusion has {self.values.size} values, mesh has {mesh.n_elements} elements")
        return np.array(self.values)

    def __repr__(self):
        if self.values.ndim == 0:
            return f"DiffusionField({float(self.values)})"
        return f"DiffusionField(<{self.values.size} element values>)"


def _triple_products(dim):
    """Reference integrals of products of three barycentric coordinates,
    divided by the element measure."""
    n = dim + 1
    t = np.empty((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                mult = np.bincount([a, b, c], minlength=n)
                num = math.factorial(dim) * math.prod(math.factorial(m) for m in mult)
                t[a, b, c] = num / math.factorial(3 + dim)
    return t


def _gradients(mesh):
    """Barycentric gradients, shape (n_elements, dim + 1, dim)."""
    p = mesh.nodes[mesh.elements]
    if mesh.dim == 1:
        h = mesh.element_measures
        return np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
    area2 = 2.0 * mesh.element_measures
    g = np.empty((mesh.n_elements, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / area2
        g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / area2
    return g


class Assembler:
    """Assembles element contributions into CSR matrices on a fixed pattern."""

    def __init__(self, mesh):
        self.mesh = mesh
        el = mesh.elements
        nloc = el.shape[1]
        rows = np.repeat(el, nloc, axis=1).ravel()
        cols = np.tile(el, (1, nloc)).ravel()
        n = mesh.n_nodes
        keys, inv = np.unique(rows * n + cols, return_inverse=True)
        self.inv = inv.reshape(len(el), nloc, nloc)
        self.nnz = len(keys)
        krow, self.indices = np.divmod(keys, n)
        self.indptr = np.searchsorted(krow, np.arange(n + 1)).astype(np.int64)
        self.indices = self.indices.astype(np.int64)
        self.rows = krow.astype(np.int64)
        self.bandwidth = int(np.abs(self.rows - self.indices).max())
        upper = self.rows <= self.indices
        self._band_sel = np.nonzero(upper)[0]
        self._band_pos = (self.bandwidth + self.rows[upper] - self.indices[upper],
                          self.indices[upper])
        self.n = mesh.n_nodes
        self._mass = None
        self._product = None

    @property
    def shape(self):
        return (self.mesh.n_nodes, self.mesh.n_nodes)

    def from_data(self, data):
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=self.shape)

    def scatter(self, local):
        """Sum element matrices ``local`` (n_elements, nloc, nloc) into CSR data."""
        return np.bincount(self.inv.ravel(), weights=local.ravel(), minlength=self.nnz)

    def mass(self):
        if self._mass is None:
            d = self.mesh.dim
            ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
            local = self.mesh.element_measures[:, None, None] * ref
            self._mass = self.from_data(self.scatter(local))
        return self._mass

    def stiffness(self, diffusion):
        if not isinstance(diffusion, DiffusionField):
            diffusion = DiffusionField(diffusion)
        dvals = diffusion.per_element(self.mesh)
        g = _gradients(self.mesh)
        local = np.einsum("eid,ejd->eij", g, g)
        local *= (dvals * self.mesh.element_measures)[:, None, None]
        return self.from_data(self.scatter(local))

    def product_operator(self):
        """Sparse map ``u -> data`` of the weighted mass matrix with entries
        ``∫ u φ_i φ_j``, integrated exactly for P1 ``u``."""
        if self._product is None:
            el = self.mesh.elements
            t = _triple_products(self.mesh.dim)
            vals = self.mesh.element_measures[:, None, None, None] * t
            rows = np.broadcast_to(self.inv[:, :, :, None], vals.shape)
            cols = np.broadcast_to(el[:, None, None, :], vals.shape)
            self._product = sparse.csr_matrix(
                (vals.ravel(), (rows.ravel(), cols.ravel())),
                shape=(self.nnz, self.mesh.n_nodes))
        return self._product

    def weighted_mass(self, u):
        """Matrix with entries ``∫ u φ_i φ_j``."""
        return self.from_data(self.product_operator() @ np.asarray(u, dtype=float))

    def matvec(self, data, x):
        return np.bincount(self.rows, weights=data * x[self.indices], minlength=self.n)

    def solve(self, data, b, rtol=SOLVE_RTOL):
        """Solve the SPD system whose CSR data on this pattern is ``data``.

        Same contract as :func:`solve_spd`; skips building sparse objects when
        the pattern is narrow-banded.
        """
        bnorm = math.sqrt(b @ b)
        if bnorm == 0:
            return np.zeros_like(b)
        n = self.shape[0]
        try:
            if _use_banded(self.bandwidth, n):
                ab = np.zeros((self.bandwidth + 1, n))
                ab[self._band_pos] = data[self._band_sel]
                # LAPACK directly: solveh_banded's input checks dominate on small meshes
                _, x, info = _pbsv(ab, b)
                if info != 0:
                    raise np.linalg.LinAlgError(f"banded Cholesky failed (info={info})")
            else:
                x = spla.spsolve(self.from_data(data).tocsc(), b)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverFailureError(f"factorization failed: {exc}", float("inf")) from exc
        r = self.matvec(data, x) - b
        _check_residual(math.sqrt(r @ r) / bnorm, rtol, "direct")
        return x


def assembler_for(mesh):
    """Shared :class:`Assembler` for ``mesh``, cached on the mesh itself."""
    asm = mesh.__dict__.get("_assembler")
    if asm is None:
        asm = Assembler(mesh)
        object.__setattr__(mesh, "_assembler", asm)
    return asm


def assemble_mass(mesh):
    """Consistent P1 mass matrix ``M_ij = ∫ φ_i φ_j``."""
    return assembler_for(mesh).mass().copy()


def assemble_stiffness(mesh, diffusion):
    """P1 stiffness ``K_ij = ∫ D ∇φ_j · ∇φ_i`` with element-wise constant ``D``."""
    return assembler_for(mesh).stiffness(diffusion)


def _coeffs(f, mesh):
    if isinstance(f, FeField):
        if f.mesh is not mesh:
            raise InvalidArgumentError("field lives on a different mesh")
        return f.coeffs
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_nodes,):
        raise InvalidArgumentError("vector length does not match mesh node count")
    return f


def l2_inner(mesh, f, g):
    """``∫ f g dx`` for P1 fields, computed as ``fᵀ M g``."""
    fc, gc = _coeffs(f, mesh), _coeffs(g, mesh)
    return float(fc @ (assembler_for(mesh).mass() @ gc))


def _bandwidth(A):
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    return int(np.abs(rows - A.indices).max()) if A.nnz else 0


def _use_banded(bw, n):
    # row-major grid numbering keeps bw near the image width, where banded
    # Cholesky beats sparse LU; arbitrary orderings fall back to LU
    return bw <= 4 or bw * bw <= 64 * n


def _check_residual(res, rtol, method):
    if not np.isfinite(res) or res > rtol:
        raise SolverFailureError(f"{method} solve did not converge", float(res))


def _solve_banded(A, b, bw):
    n = A.shape[0]
    coo = A.tocoo()
    upper = coo.row <= coo.col
    ab = np.zeros((bw + 1, n))
    ab[bw + coo.row[upper] - coo.col[upper], coo.col[upper]] = coo.data[upper]
    return scipy.linalg.solveh_banded(ab, b, check_finite=False)


def solve_spd(A, b, rtol=SOLVE_RTOL, method="direct", maxiter=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    ``method="direct"`` uses a banded Cholesky factorization for narrow-band
    matrices (1D meshes, row-major grid meshes) and sparse LU otherwise; ``method="cg"`` runs
    Jacobi-preconditioned conjugate gradients. Either way the relative
    residual is checked against ``rtol``.

    Raises
    ------
    SolverFailureError
        If the achieved relative residual exceeds ``rtol``.
    """
    A = sparse.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise InvalidArgumentError(f"shape mismatch: A {A.shape}, b {b.shape}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b)

    if method == "direct":
        bw = _bandwidth(A)
        try:
            if _use_banded(bw, A.shape[0]):
                x = _solve_banded(A, b, bw)
            else:
                x = spla.spsolve(A.tocsc(), b)
        except (np.linalg.LinAlgError, RuntimeError) as exc:
            raise SolverFailureError(f"factorization failed: {exc}", float("inf")) from exc
    elif method == "cg":
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise SolverFailureError("non-positive diagonal, matrix is not SPD", float("inf"))
        prec = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
        x, info = spla.cg(A, b, rtol=rtol * 0.1, atol=0.0, M=prec,
                          maxiter=maxiter or 10 * A.shape[0])
    else:
        raise InvalidArgumentError(f"unknown solve method {method!r}")

    _check_residual(np.linalg.norm(A @ x - b) / bnorm, rtol, method)
    return x

"""Weighted 1D operators L^{B,N,lambda}, their Schrodinger conjugates and spectra.

L^{B,N,lambda} u = (f^N u')' / f^N - lambda u / f^2 is discretized by cell
centred finite volumes on a uniform partition of B (or of its truncation
[lo, hi] for unbounded B).  Writing m_i = f(r_i)^N h for the cell masses
and A for the symmetric stiffness matrix,

    -L = M^{-1} A,

so the operator is self-adjoint in the discrete f^N-weighted inner product
and its spectrum comes from the symmetric tridiagonal M^{-1/2} A M^{-1/2}.

Boundary handling per end: a degenerate end (f = 0) gets zero flux through
a face of zero weight, a non-degenerate end gets the Neumann condition, and
a truncation end gets ``far_bc`` ("neumann" or "dirichlet").
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceFailure, NeedsSmoothness, PreconditionFailed, SingularWeight
from .fiber import FiberSpace, fiber_operator
from .warp import BaseSpace, WarpFunction

ZERO_TOL = 1e-12


@dataclass(eq=False)
class SpectralOperator:
    B: BaseSpace
    f: WarpFunction
    N: float
    lam: float
    grid: np.ndarray  # cell centres
    faces: np.ndarray
    h: float
    mass: np.ndarray  # f^N h at centres
    face_weight: np.ndarray  # f^N at faces
    diag: np.ndarray  # stiffness diagonal
    offdiag: np.ndarray  # stiffness off-diagonal (periodic wrap entry last for circles)
    bc: tuple  # (left, right) in {"degenerate", "neumann", "dirichlet", "periodic"}
    truncation: Optional[float] = None

    @property
    def periodic(self):
        return self.bc[0] == "periodic"

    def stiffness(self):
        n = self.grid.size
        if self.periodic:
            A = np.diag(self.diag) + np.diag(self.offdiag[:-1], 1) + np.diag(self.offdiag[:-1], -1)
            A[0, -1] = A[-1, 0] = self.offdiag[-1]
            return A
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matrix(self):
        """Dense matrix of L^{B,N,lambda} acting on grid values."""
        return -self.stiffness() / self.mass[:, None]

    def apply(self, u):
        u = np.asarray(u, float)
        Au = self.diag * u
        if self.periodic:
            e = self.offdiag
            Au = Au + e * np.roll(u, -1) + np.roll(e * u, 1)
        else:
            Au[:-1] += self.offdiag * u[1:]
            Au[1:] += self.offdiag * u[:-1]
        return -Au / self.mass

    def inner(self, u, v):
        return float(np.sum(np.asarray(u) * np.asarray(v) * self.mass))

    def gradient_energy(self, u):
        """Sum over faces of f^N (u_{i+1} - u_i)^2 / h, plus the potential part."""
        u = np.asarray(u, float)
        du = np.diff(u)
        w = self.face_weight[1:-1]
        e = float(np.sum(w * du ** 2) / self.h)
        if self.periodic:
            e += float(self.face_weight[-1] * (u[0] - u[-1]) ** 2 / self.h)
        for side, idx, fw in ((0, 0, self.face_weight[0]), (1, -1, self.face_weight[-1])):
            if self.bc[side] == "dirichlet":
                e += float(2 * fw * u[idx] ** 2 / self.h)
        fc = np.asarray(self.f(self.grid), float)
        return e + float(np.sum(self.lam * fc ** (self.N - 2) * self.h * u ** 2))


def _end_conditions(B, f, far_bc):
    if B.kind == "circle":
        return ("periodic", "periodic")
    out = []
    ends = {"line": (None, None), "halfline": (B.a, None), "interval": (B.a, B.b)}[B.kind]
    for p in ends:
        if p is None:
            out.append(far_bc)
        elif f(p) <= ZERO_TOL:
            out.append("degenerate")
        else:
            out.append("neumann")
    return tuple(out)


def assemble(B: BaseSpace, f: WarpFunction, N: float, lam: float = 0.0, grid_n: int = 400,
             truncation: float = 5.0, far_bc: str = "neumann"):
    if lam < 0:
        raise PreconditionFailed("lambda must be nonnegative")
    if far_bc not in ("neumann", "dirichlet"):
        raise ValueError("far_bc must be 'neumann' or 'dirichlet'")
    lo, hi = B.window(truncation)
    n = int(grid_n)
    h = (hi - lo) / n
    faces = lo + h * np.arange(n + 1)
    centres = lo + h * (np.arange(n) + 0.5)
    fc = np.asarray(f(centres), float)
    if np.any(fc <= ZERO_TOL):
        raise SingularWeight(f"warp vanishes at interior point {centres[np.argmin(fc)]:.6g}")
    bc = _end_conditions(B, f, far_bc)
    wf = np.clip(np.asarray(f(faces), float), 0.0, None) ** N
    mass = fc ** N * h
    diag = lam * fc ** (N - 2) * h
    inner = wf[1:-1] / h
    diag = diag.copy()
    diag[:-1] += inner
    diag[1:] += inner
    off = -inner
    if bc[0] == "periodic":
        wrap = wf[0] / h  # face between the last and first cell
        diag[0] += wrap
        diag[-1] += wrap
        off = np.append(off, -wrap)
    else:
        if bc[0] == "dirichlet":
            diag[0] += 2 * wf[0] / h
        if bc[1] == "dirichlet":
            diag[-1] += 2 * wf[-1] / h
    R = truncation if B.kind in ("line", "halfline") else None
    return SpectralOperator(B, f, float(N), float(lam), centres, faces, h, mass, wf, diag, off, bc, R)


@dataclass
class Eigenpairs:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, orthonormal in the weighted inner product


def spectrum(op: SpectralOperator, k: int):
    """The k smallest eigenvalues of -L with weighted-orthonormal eigenvectors."""
    n = op.grid.size
    if not 1 <= k <= n - 2:
        raise ValueError(f"k must lie in [1, {n - 2}]")
    s = 1.0 / np.sqrt(op.mass)
    try:
        if op.periodic:
            S = op.stiffness() * s[:, None] * s[None, :]
            vals, vecs = linalg.eigh(S, subset_by_index=[0, k - 1])
        else:
            d = op.diag * s * s
            e = op.offdiag * s[:-1] * s[1:]
            vals, vecs = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    vecs = vecs * s[:, None]
    for j in range(k):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] *= -1
    return Eigenpairs(vals, vecs)


def resolved_eigenvalues(B, f, N, lam, grid_n, k, truncation=5.0, far_bc="neumann"):
    """Richardson extrapolation of the k smallest eigenvalues from grid_n and 2 grid_n."""
    coarse = spectrum(assemble(B, f, N, lam, grid_n, truncation, far_bc), k).eigenvalues
    fine = spectrum(assemble(B, f, N, lam, 2 * grid_n, truncation, far_bc), k).eigenvalues
    return (4 * fine - coarse) / 3


def heat_apply(op: SpectralOperator, t: float, u0):
    """exp(t L) u0 by full spectral expansion in the weighted inner product."""
    if t <= 0:
        raise ValueError("t must be positive")
    pairs = spectrum_full(op)
    coeff = pairs.eigenvectors.T @ (np.asarray(u0, float) * op.mass)
    return pairs.eigenvectors @ (np.exp(-pairs.eigenvalues * t) * coeff)


def spectrum_full(op: SpectralOperator):
    s = 1.0 / np.sqrt(op.mass)
    S = op.stiffness() * s[:, None] * s[None, :]
    vals, vecs = linalg.eigh(S)
    return Eigenpairs(vals, vecs * s[:, None])


def product_eigenvalue(B, f, N, fiber_lambda, j, grid_n=400, truncation=5.0, far_bc="neumann"):
    """j-th eigenvalue of the warped Laplacian on the sector u1 (x) e with L^F e = -fiber_lambda e."""
    op = assemble(B, f, N, fiber_lambda, grid_n, truncation, far_bc)
    return float(spectrum(op, j + 1).eigenvalues[j])


def tensor_spectrum(B, f, N, F: FiberSpace, grid_n, fiber_n, k, truncation=5.0, far_bc="neumann"):
    """Smallest eigenpairs of the full warped Laplacian on the product grid.

    Returns eigenvalues and eigenvectors shaped (k, base, fiber).
    """
    op = assemble(B, f, N, 0.0, grid_n, truncation, far_bc)
    xF, mF, SF = fiber_operator(F, fiber_n)
    fc = np.asarray(f(op.grid), float)
    AB = sparse.csr_matrix(op.stiffness())
    A = sparse.kron(AB, sparse.diags(mF)) + sparse.kron(sparse.diags(fc ** (N - 2) * op.h), sparse.csr_matrix(SF))
    M = sparse.kron(sparse.diags(op.mass), sparse.diags(mF))
    vals, vecs = eigsh(A.tocsc(), k=k, M=M.tocsc(), sigma=-1e-3, which="LM", v0=np.ones(A.shape[0]))
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    return vals, vecs.T.reshape(k, op.grid.size, xF.size)


# Schrodinger conjugate -------------------------------------------------------

@dataclass(eq=False)
class SchrodingerForm:
    grid: np.ndarray
    h: float
    potential: np.ndarray
    bc: tuple  # per end: ("dirichlet",) | ("robin", beta) | ("periodic",)
    degenerate_ends: tuple  # boundary coordinates where f vanishes

    def spectrum(self, k):
        """k smallest eigenvalues of -d^2/dr^2 + V with the conjugated boundary conditions."""
        n = self.grid.size
        h = self.h
        d = 2.0 / h ** 2 + self.potential
        e = np.full(n - 1, -1.0 / h ** 2)
        d = d.copy()
        for side, idx in ((0, 0), (1, -1)):
            cond = self.bc[side]
            if cond[0] == "dirichlet":
                d[idx] += 1.0 / h ** 2  # ghost value equals minus the boundary cell
            elif cond[0] == "robin":
                beta = cond[1]
                if side == 0:
                    rho = (1 - beta * h / 2) / (1 + beta * h / 2)
                else:
                    rho = (1 + beta * h / 2) / (1 - beta * h / 2)
                d[idx] -= rho / h ** 2
        if self.bc[0][0] == "periodic":
            S = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
            S[0, -1] = S[-1, 0] = -1.0 / h ** 2
            return linalg.eigh(S, eigvals_only=True, subset_by_index=[0, k - 1])
        return linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))


def schrodinger_potential(f: WarpFunction, N, lam, r):
    """V = ((N^2 - 2N)/4 f'^2 + (N/2) f f'' + lambda) / f^2."""
    fr = np.asarray(f(r), float)
    d1 = np.asarray(f.derivative(r, 1), float)
    d2 = np.asarray(f.derivative(r, 2), float)
    return ((N * N - 2 * N) / 4 * d1 ** 2 + N / 2 * fr * d2 + lam) / fr ** 2


def schrodinger_transform(op: SpectralOperator):
    """Conjugate -L by U(phi) = f^{N/2} phi to -d^2/dr^2 + V."""
    f = op.f
    if f.is_sampled and not f.is_smooth:
        raise NeedsSmoothness("sampled warps must be smoothed before conjugation")
    V = schrodinger_potential(f, op.N, op.lam, op.grid)
    ends = (op.faces[0], op.faces[-1])
    bc = []
    degenerate = []
    for side, cond in enumerate(op.bc):
        if cond == "periodic":
            bc.append(("periodic",))
        elif cond in ("degenerate", "dirichlet"):
            bc.append(("dirichlet",))
            if cond == "degenerate":
                degenerate.append(float(ends[side]))
        else:
            # u' = 0 becomes psi' = (N/2)(f'/f) psi at the end face
            p = ends[side]
            beta = op.N / 2 * float(f.derivative(p)) / float(f(p))
            bc.append(("robin", beta))
    return SchrodingerForm(op.grid.copy(), op.h, V, tuple(bc), tuple(degenerate))


def limit_point_check(form: SchrodingerForm, boundary: float, cells: int = 10):
    """True iff V(r) > 3 / (4 dist(r, boundary)^2) on the first ``cells`` cells."""
    if not any(abs(boundary - p) < 1e-12 for p in form.degenerate_ends):
        raise PreconditionFailed(f"{boundary} is not an endpoint where the warp vanishes")
    dist = np.abs(form.grid - boundary)
    near = np.argsort(dist)[:cells]
    return bool(np.all(form.potential[near] > 0.75 / dist[near] ** 2))


def resolved_schrodinger_eigenvalues(B, f, N, lam, grid_n, k, truncation=5.0, far_bc="neumann"):
    """Richardson extrapolation of the conjugate spectrum from grid_n and 2 grid_n."""
    coarse = schrodinger_transform(assemble(B, f, N, lam, grid_n, truncation, far_bc)).spectrum(k)
    fine = schrodinger_transform(assemble(B, f, N, lam, 2 * grid_n, truncation, far_bc)).spectrum(k)
    return (4 * fine - coarse) / 3

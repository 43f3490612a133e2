"""Nodal time basis and per-cell space-time operators."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .quadrature import gauss_legendre
from .vem import DegenerateCellError


class TimeBasis:
    """Lagrange polynomials through the N+1 Gauss-Legendre nodes of [0, 1]."""

    def __init__(self, N):
        self.N = N
        self.nodes, self.weights = gauss_legendre(N + 1)
        n = N + 1
        # monomial coefficients of each Lagrange polynomial
        V = np.vander(self.nodes, n, increasing=True)
        self._coef = np.linalg.inv(V)  # column k: coefficients of psi_k
        self.psi0 = self.psi(0.0)[0]
        self.psi1 = self.psi(1.0)[0]

    def psi(self, tau):
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.vander(t, self.N + 1, increasing=True) @ self._coef

    def dpsi(self, tau):
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        n = self.N + 1
        P = np.zeros((len(t), n))
        for j in range(1, n):
            P[:, j] = j * t ** (j - 1)
        return P @ self._coef

    @property
    def mass(self):
        """int psi_a psi_b: diagonal because the nodes are Gauss points."""
        return np.diag(self.weights)

    @property
    def stiff(self):
        """int psi'_a psi_b."""
        return (self.dpsi(self.nodes) * self.weights[:, None]).T @ self.psi(self.nodes)

    @property
    def T1(self):
        """psi_a(1) psi_b(1) - int psi'_a psi_b (temporal factor of K1)."""
        return np.outer(self.psi1, self.psi1) - self.stiff


def build_time_basis(N):
    return TimeBasis(N)


def assemble_mass(basis):
    """Consistency mass plus |P| times the DOF stabilization."""
    return basis.consistency_mass() + basis.area * basis.stabilization()


def spatial_derivative_matrices(basis):
    """int phi_k d(phi_l)/dx and the y counterpart (projected, consistency only)."""
    Hm = basis.Hmix
    return basis.Pi0.T @ Hm @ basis.Pix, basis.Pi0.T @ Hm @ basis.Piy


def assemble_spacetime(basis, tb):
    """F0, Kx, Ky with space-time index r = a * NDOF + l (time-major)."""
    Mc = basis.consistency_mass()
    Sx, Sy = spatial_derivative_matrices(basis)
    F0 = np.kron(tb.psi0[:, None], Mc)
    Kx = np.kron(tb.mass, Sx)
    Ky = np.kron(tb.mass, Sy)
    return F0, Kx, Ky


def assemble_K1_stabilized(basis, tb, stab_scale=1.0):
    """K1 = T1 (x) (M_c + s S).

    The stabilization is tensored with the same temporal factor as the
    consistency part so that the operator stays invertible.
    """
    A = basis.consistency_mass() + stab_scale * basis.stabilization()
    return np.kron(tb.T1, A)


@dataclass
class ElementOperators:
    M: np.ndarray
    K1: np.ndarray
    F0: np.ndarray
    Kx: np.ndarray
    Ky: np.ndarray
    M_lu: tuple
    K1_lu: tuple

    def solve_M(self, b):
        return sla.lu_solve(self.M_lu, b)

    def solve_K1(self, b):
        return sla.lu_solve(self.K1_lu, b)


def _factor(A, what):
    lu, piv = sla.lu_factor(A)
    if np.abs(np.diag(lu)).min() < 1e-14 * np.abs(A).max():
        raise DegenerateCellError(f"{what} factorization failed")
    return lu, piv


def element_operators(basis, tb, stab_scale=1.0):
    M = assemble_mass(basis)
    K1 = assemble_K1_stabilized(basis, tb, stab_scale)
    F0, Kx, Ky = assemble_spacetime(basis, tb)
    return ElementOperators(M, K1, F0, Kx, Ky, _factor(M, "M"), _factor(K1, "K1"))

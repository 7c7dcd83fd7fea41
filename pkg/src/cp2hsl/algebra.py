"""Complex 3x3 matrix arithmetic and the Lie-theoretic scaffolding.

The ambient algebra is gl(3,C) with group elements carried as SL(3,C) /
SU(3) representatives.  Two involutions organise everything: an inner
involution ``sigma`` (conjugation by diag(-1,-1,1)) and an order-4 outer
automorphism ``tau``.  Matrices decompose into the four i^j-eigenspaces of
tau, indexed by j in {-1, 0, 1, 2}; the j=0 piece is an sl(2,C) block which
splits further into su(2) plus an upper-triangular Borel part.

Convention: tau acts on the group as g -> S^{-1} (g^t)^{-1} S and on the
algebra as x -> -S^{-1} x^t S.  With this sign the block shapes listed in
``project_eigenspace`` scale exactly by i^j, and untwisting by kappa(zeta)
produces the lambda-loop symmetry with S_lambda as written in
``structure_S_lambda``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm as _scipy_expm

__all__ = [
    "J2",
    "S_TAU",
    "D_MASLOV",
    "SIGMA_CONJ",
    "kappa",
    "structure_S_lambda",
    "real_conjugate",
    "apply_sigma",
    "apply_tau",
    "apply_tau_alg",
    "project_eigenspace",
    "iwasawa_g0",
    "expm",
    "expm_stack",
    "logm_stack",
    "frobenius",
    "check_traceless",
    "su3_distance",
    "projective_distance",
]

MEMBERSHIP_TOL = 1e-10

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)

# block matrix S = [[J, 0], [0, 1]]
S_TAU = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 1]], dtype=complex)
_S_INV = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)

# diag(1, 1, -2), the direction of the Maslov piece of the algebra
D_MASLOV = np.diag([1.0, 1.0, -2.0]).astype(complex)

SIGMA_CONJ = np.diag([-1.0, -1.0, 1.0]).astype(complex)


def kappa(zeta: complex) -> np.ndarray:
    """diag(zeta, zeta, 1); conjugation by kappa(-1) equals sigma."""
    return np.diag([zeta, zeta, 1.0]).astype(complex)


def structure_S_lambda(lam: complex) -> np.ndarray:
    """The residual symmetry matrix of untwisted loops (a function of lambda)."""
    return np.array(
        [[0, 1j * lam, 0], [-1j * lam, 0, 0], [0, 0, 1]], dtype=complex
    )


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(x)))


def real_conjugate(x: np.ndarray) -> np.ndarray:
    """Conjugation of gl(3,C) relative to the compact real form: x -> -x^dagger."""
    x = np.asarray(x, dtype=complex)
    return -np.conj(np.swapaxes(x, -1, -2))


def apply_sigma(g: np.ndarray) -> np.ndarray:
    """Group involution: conjugation by diag(-1,-1,1)."""
    return SIGMA_CONJ @ np.asarray(g, dtype=complex) @ SIGMA_CONJ


def apply_tau(g: np.ndarray) -> np.ndarray:
    """Order-4 outer automorphism on the group, tau(g) = S^{-1} g^* S.

    Here g^* = (g^t)^{-1}.  Raises on singular input.
    """
    g = np.asarray(g, dtype=complex)
    if abs(np.linalg.det(g)) < 1e-300:
        raise ValueError("apply_tau: singular matrix")
    gstar = np.linalg.inv(g.T)
    return _S_INV @ gstar @ S_TAU


def apply_tau_alg(x: np.ndarray) -> np.ndarray:
    """Derivative of tau at the identity: x -> -S^{-1} x^t S."""
    x = np.asarray(x, dtype=complex)
    return -_S_INV @ x.T @ S_TAU


def check_traceless(x: np.ndarray, tol: float = MEMBERSHIP_TOL) -> None:
    x = np.asarray(x)
    if abs(np.trace(x)) > tol * max(1.0, frobenius(x)):
        raise ValueError(
            f"matrix is not traceless: |tr| = {abs(np.trace(x)):.3e}"
        )


def project_eigenspace(x: np.ndarray, j: int) -> np.ndarray:
    """Component of a traceless x in the i^j-eigenspace of tau.

    The four blocks are
        j=0 : [[Q, 0], [0, 0]] with Q in sl(2,C)
        j=2 : a * diag(1, 1, -2)
        j=1 : [[0, u], [-i(Ju)^t, 0]] for u in C^2
        j=-1: [[0, v], [+i(Jv)^t, 0]] for v in C^2
    and the projections sum to x.
    """
    x = np.asarray(x, dtype=complex)
    check_traceless(x)
    j = ((j % 4) + 4) % 4
    out = np.zeros((3, 3), dtype=complex)
    if j == 0:
        a = -x[2, 2] / 2.0
        Q = x[:2, :2] - a * np.eye(2)
        Q = Q - (np.trace(Q) / 2.0) * np.eye(2)
        out[:2, :2] = Q
    elif j == 2:
        out = (-x[2, 2] / 2.0) * D_MASLOV
    elif j == 1:
        u1 = (x[0, 2] - 1j * x[2, 1]) / 2.0
        u2 = (x[1, 2] + 1j * x[2, 0]) / 2.0
        out[0, 2], out[1, 2] = u1, u2
        out[2, 0], out[2, 1] = -1j * u2, 1j * u1
    else:  # j == 3, i.e. the index -1
        v1 = (x[0, 2] + 1j * x[2, 1]) / 2.0
        v2 = (x[1, 2] - 1j * x[2, 0]) / 2.0
        out[0, 2], out[1, 2] = v1, v2
        out[2, 0], out[2, 1] = 1j * v2, -1j * v1
    return out


def iwasawa_g0(x: np.ndarray, tol: float = MEMBERSHIP_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Split the sl(2,C)-block piece into su(2) + borel.

    Input must be supported in the upper 2x2 block and traceless there.
    Returns (k, b) with k anti-Hermitian traceless, b upper triangular with
    real diagonal, k + b = x.  The decomposition is unique.
    """
    x = np.asarray(x, dtype=complex)
    outside = x.copy()
    outside[:2, :2] = 0.0
    if frobenius(outside) > tol * max(1.0, frobenius(x)):
        raise ValueError("iwasawa_g0: support outside the upper 2x2 block")
    Q = x[:2, :2]
    if abs(np.trace(Q)) > tol * max(1.0, frobenius(x)):
        raise ValueError("iwasawa_g0: block is not traceless")
    k = np.zeros((3, 3), dtype=complex)
    b = np.zeros((3, 3), dtype=complex)
    k[0, 0] = 1j * Q[0, 0].imag
    k[1, 1] = -k[0, 0]
    k[1, 0] = Q[1, 0]
    k[0, 1] = -np.conj(Q[1, 0])
    b[0, 0] = Q[0, 0].real
    b[1, 1] = Q[1, 1].real
    b[0, 1] = Q[0, 1] + np.conj(Q[1, 0])
    return k, b


def expm(x: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring, scipy backend)."""
    return _scipy_expm(np.asarray(x, dtype=complex))


def expm_stack(xs: np.ndarray) -> np.ndarray:
    """Exponential of a stack (..., 3, 3)."""
    return _scipy_expm(np.asarray(xs, dtype=complex))


def logm_stack(gs: np.ndarray, refine: bool = True) -> np.ndarray:
    """Principal logarithm of a stack of matrices via eigendecomposition.

    One Newton refinement step log <- log + expm(-log) g - I absorbs the
    conditioning loss of a nearly defective eigenbasis.  Inputs must have no
    eigenvalue on the closed negative real axis.
    """
    gs = np.asarray(gs, dtype=complex)
    w, V = np.linalg.eig(gs)
    if np.any(np.abs(w) < 1e-300):
        raise ValueError("logm_stack: singular matrix in stack")
    if np.any((w.real < 0) & (np.abs(w.imag) < 1e-14 * np.abs(w.real))):
        raise ValueError("logm_stack: eigenvalue on the negative real axis")
    lw = np.log(w)
    out = np.einsum("...ab,...b,...bc->...ac", V, lw, np.linalg.inv(V))
    if refine:
        corr = np.einsum("...ab,...bc->...ac", expm_stack(-out), gs)
        out = out + corr - np.eye(3)
    return out


def su3_distance(g: np.ndarray, h: np.ndarray) -> float:
    return frobenius(np.asarray(g) - np.asarray(h))


def projective_distance(g: np.ndarray, h: np.ndarray) -> float:
    """Distance between PU(3) representatives: min over unit-phase rescaling."""
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    ip = np.vdot(h, g)
    if abs(ip) < 1e-300:
        return frobenius(g - h)
    phase = ip / abs(ip)
    return frobenius(g - phase * h)

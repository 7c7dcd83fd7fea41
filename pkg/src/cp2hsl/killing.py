"""Polynomial Killing fields, Lax flows, the Symes map, and spectral sampling.

A potential with modes >= -2 generates an extended frame through the Symes
map (annulus factor of exp(w eta)); a loop with modes >= -(4d+2) evolves
under the commuting Lax flows d xi = [xi, (zeta^{4d} xi dz)_E].  The form
projection (eta dz)_E is real-linear, so the flow along a direction e in
the w-plane uses Re(e) split(eta) + Im(e) split(i eta).  Spectral data is
sampled numerically: the characteristic polynomial of the untwisted loop at
each lambda, which the flows must preserve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import frobenius, expm_stack, real_conjugate
from .loops import TwistedLoop, from_circle, multiply, invert, untwist
from .factorization import algebra_split, split_form, iwasawa_factorize
from .frames import ExtendedFrameField, GridSpec, MaurerCartanField, _fd_axis

__all__ = [
    "SymesPotential",
    "CharPolyCurve",
    "validate_symes_potential",
    "symes",
    "symes_field",
    "lax_generator",
    "lax_flow",
    "char_poly_curve",
    "char_poly_drift",
    "is_adapted_pkf",
    "pkf_characterization_check",
    "vacuum_orbit_criterion",
]


@dataclass
class SymesPotential:
    """Twisted loop with modes >= -2 and g2-shaped leading coefficient."""

    loop: TwistedLoop

    def __post_init__(self):
        validate_symes_potential(self.loop)


def validate_symes_potential(eta: TwistedLoop, tol: float = 1e-9) -> None:
    if eta.kmin < -2:
        raise ValueError("Symes potential must have modes >= -2")
    scale = max(1.0, eta.norm())
    if eta.twist_defect() > tol * scale:
        raise ValueError("Symes potential violates the twist grading")
    lead = eta.mode(-2)
    off = lead - np.diag(np.diag(lead))
    if frobenius(off) > tol * scale or abs(lead[0, 0] - lead[1, 1]) > tol * scale:
        raise ValueError("mode -2 of a Symes potential must be diagonal of shape (a,a,-2a)")


def symes(eta: TwistedLoop, w: complex, samples: int | None = None,
          tol: float = 1e-11) -> TwistedLoop:
    """Annulus factor of exp(w eta): the extended frame of the potential at w."""
    validate_symes_potential(eta)
    width = eta.kmax - eta.kmin + 1
    scale = abs(w) * eta.norm()
    # support of exp grows with |w eta|; size the circle sampling generously
    need = int(2 * (width + 4 * scale + 12))
    M = samples or max(4 * ((need + 3) // 4), 128)
    V = eta.eval_circle(M)
    G = expm_stack(w * V)
    g = from_circle(G, -(M // 2 - 1), M // 2 - 1).trim(1e-16)
    g.limit = M // 2 - 1
    fac = iwasawa_factorize(g, samples=M, tol=tol)
    return fac.e_part


def symes_field(eta: TwistedLoop, grid: GridSpec, tol: float = 1e-11) -> ExtendedFrameField:
    W = grid.w()
    loops = [[symes(eta, W[i, j], tol=tol) for j in range(grid.n2)]
             for i in range(grid.n1)]
    return ExtendedFrameField(grid, loops)


def lax_generator(xi: TwistedLoop, d: int, direction: complex) -> TwistedLoop:
    """[xi, alpha(e)] for the Lax form alpha = (zeta^{4d} xi dz)_E along e."""
    eta = xi.shift(4 * d)
    P, Q = split_form(eta)
    e = complex(direction)
    gen = P * e + Q * np.conj(e)       # alpha evaluated on the direction vector
    return _bracket(xi, gen)


def _bracket(a: TwistedLoop, b: TwistedLoop) -> TwistedLoop:
    return (multiply(a, b, limit=a.limit + 4) -
            multiply(b, a, limit=a.limit + 4))


def lax_flow(xi0: TwistedLoop, d: int, steps: int, dt: float,
             direction: complex = 1.0, support_tol: float = 1e-6,
             keep_every: int = 1) -> list[TwistedLoop]:
    """RK4 trajectory of d xi = [xi, (zeta^{4d} xi dz)_E] along a w-direction.

    The structural lower bound -(4d+2) of the mode support is enforced each
    step; mass pushed below it (or beyond the truncation limit) above
    `support_tol` aborts the run.
    """
    lo = -(4 * d + 2)
    if xi0.kmin < lo:
        raise ValueError(f"initial loop has modes below {lo}")
    lim = max(xi0.limit, abs(xi0.kmin), abs(xi0.kmax))
    out = [xi0]
    xi = xi0
    for n in range(steps):
        k1 = lax_generator(xi, d, direction)
        k2 = lax_generator(xi + k1 * (dt / 2.0), d, direction)
        k3 = lax_generator(xi + k2 * (dt / 2.0), d, direction)
        k4 = lax_generator(xi + k3 * dt, d, direction)
        xi = xi + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
        dropped = sum(np.linalg.norm(c) for k, c in xi.modes()
                      if k < lo or k > lim)
        if dropped > support_tol * max(1.0, xi.norm()):
            raise ValueError(
                f"lax_flow: support escaped the window at step {n}, mass {dropped:.3e}")
        kept = {k: c for k, c in xi.modes() if lo <= k <= lim}
        xi = TwistedLoop.from_modes(kept)
        xi.limit = lim
        xi = xi.trim(1e-17)
        if (n + 1) % keep_every == 0:
            out.append(xi)
    return out


@dataclass
class CharPolyCurve:
    """Coefficients of det(x I - xi_hat(lambda)) as a cubic in x, per lambda."""

    lams: np.ndarray          # sampled lambda values
    coeffs: np.ndarray        # (n, 3): [c2, c1, c0] with x^3 + c2 x^2 + c1 x + c0


def char_poly_curve(xi: TwistedLoop, lams: np.ndarray) -> CharPolyCurve:
    u = untwist(xi)
    lams = np.asarray(lams, dtype=complex)
    vals = u.eval(lams)
    tr = np.trace(vals, axis1=-2, axis2=-1)
    tr2 = np.trace(np.einsum("...ab,...bc->...ac", vals, vals),
                   axis1=-2, axis2=-1)
    det = np.linalg.det(vals)
    c2 = -tr
    c1 = (tr**2 - tr2) / 2.0
    c0 = -det
    return CharPolyCurve(lams, np.stack([c2, c1, c0], axis=-1))


def char_poly_drift(traj: list[TwistedLoop], lams: np.ndarray) -> float:
    """Max coefficient drift of the sampled curve along a trajectory."""
    base = char_poly_curve(traj[0], lams).coeffs
    drift = 0.0
    for xi in traj[1:]:
        cur = char_poly_curve(xi, lams).coeffs
        drift = max(drift, float(np.abs(cur - base).max()))
    return drift


def is_adapted_pkf(xis: np.ndarray, mcf: MaurerCartanField,
                   d: int) -> dict:
    """Defect report for the Lax equation and the adapted leading terms.

    `xis` holds the Killing-field mode stack per grid point, shape
    (n1, n2, n_modes, 3, 3) with modes starting at kmin = -(4d+2) - pad.
    Reports (i) the finite-difference Lax defect |d xi - [xi, alpha]| on 8
    circle samples, (ii) the mismatch of the two leading coefficients
    against alpha_{-2}(d/dz), alpha_{-1}(d/dz).
    """
    grid = mcf.grid
    n1, n2, nm = xis.shape[:3]
    kmin = -(4 * d + 2)
    zs = np.exp(2j * np.pi * (np.arange(8) + 0.17) / 8)
    lax = 0.0
    for z in zs:
        pw = z ** (kmin + np.arange(nm))
        X = np.einsum("k,ijkab->ijab", pw, xis)
        ax = _contract(mcf.P, z) + _contract(mcf.Q, z)
        ay = 1j * (_contract(mcf.P, z) - _contract(mcf.Q, z))
        Xx = _fd_axis(X, 0, grid.h1)
        Xy = _fd_axis(X, 1, grid.h2)
        rx = Xx - _comm(X, ax)
        ry = Xy - _comm(X, ay)
        good = np.isfinite(rx).all(axis=(2, 3)) & np.isfinite(ry).all(axis=(2, 3))
        if good.any():
            lax = max(lax, float(np.abs(rx[good]).max()),
                      float(np.abs(ry[good]).max()))
    lead2 = np.abs(xis[:, :, 0] - mcf.mode_P(-2)).max(axis=(-2, -1))
    lead1 = np.abs(xis[:, :, 1] - mcf.mode_P(-1)).max(axis=(-2, -1))
    ok = mcf.valid
    return {
        "lax_defect": lax,
        "leading_minus2": float(lead2[ok].max()),
        "leading_minus1": float(lead1[ok].max()),
    }


def _contract(C: np.ndarray, zeta: complex) -> np.ndarray:
    ks = np.arange(-2, 3)
    return np.einsum("k,ijkab->ijab", zeta**ks, C)


def _comm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return (np.einsum("...ab,...bc->...ac", A, B)
            - np.einsum("...ab,...bc->...ac", B, A))


def pkf_characterization_check(xi_field: list, chi_field: list,
                               A: np.ndarray, grid: GridSpec) -> dict:
    """Check xi = Ad(chi) eta with eta constant and commuting with A.

    eta(w) = Ad(chi(w))^{-1} xi(w) should be w-independent and satisfy
    [A, eta] = 0; reports the max variation across the grid and the max
    commutator norm.
    """
    etas = []
    for i in range(grid.n1):
        for j in range(grid.n2):
            chi_inv = invert(chi_field[i][j])
            eta = multiply(multiply(chi_inv, xi_field[i][j]), chi_field[i][j])
            etas.append(eta)
    ref = etas[0]
    kmin = min(e.kmin for e in etas)
    kmax = max(e.kmax for e in etas)
    var = 0.0
    comm = 0.0
    for e in etas:
        for k in range(kmin, kmax + 1):
            var = max(var, frobenius(e.mode(k) - ref.mode(k)))
            comm = max(comm, frobenius(A @ e.mode(k) - e.mode(k) @ A))
    return {"d_eta": var, "commutator": comm}


def vacuum_orbit_criterion(xi: TwistedLoop, g: TwistedLoop, A: np.ndarray,
                           tol: float = 1e-8) -> dict:
    """Test whether the potential xi lies over the vacuum orbit datum g.

    Checks Ad(g(0))^{-1} xi_{-2} = A and that Ad(g)^{-1} xi commutes with
    the loop zeta^{-2} A pointwise on the circle.
    """
    if g.plus_defect() > 1e-9 * max(1.0, g.norm()):
        raise ValueError("vacuum_orbit_criterion: g must be a plus loop")
    g0 = g.mode(0)
    lead = np.linalg.inv(g0) @ xi.mode(-2) @ g0
    lead_defect = frobenius(lead - A)
    ginv = invert(g)
    conj = multiply(multiply(ginv, xi), g)
    Aloop = TwistedLoop.from_modes({-2: A})
    comm = _bracket(conj, Aloop)
    comm_defect = comm.norm()
    scale = max(1.0, xi.norm() * max(1.0, frobenius(A)))
    verdict = lead_defect < tol * scale and comm_defect < tol * scale
    return {
        "verdict": bool(verdict),
        "leading_defect": float(lead_defect),
        "commutator_defect": float(comm_defect),
    }

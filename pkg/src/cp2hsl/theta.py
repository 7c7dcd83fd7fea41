"""Riemann theta evaluation and the projective reconstruction map.

theta(W, Omega) is the lattice sum over Z^g truncated to an ellipsoid sized
from the smallest eigenvalue of Im(Omega) so the dropped relative tail is
below 1e-14.  The reconstruction map sends an extended argument
(W, w_{g+1}, w_{g+2}) to

    [c0 Theta(W+kappa), c1 e^{2 pi i w_{g+1}} Theta(W+shift2+kappa),
                        c2 e^{2 pi i w_{g+2}} Theta(W+shift3+kappa)]

and composing with the real-group flow line w -> w U + conj(w) conj(U)
produces the torus.  At genus 0 the sum is empty (Theta = 1) and the map
reduces to the explicit exponential torus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PeriodMatrixError",
    "ThetaDivisorError",
    "validate_period_matrix",
    "theta",
    "ReconstructionData",
    "phi_sections",
    "theta_map",
    "flow_line",
    "reconstruction_from_genus0",
    "recon_to_json",
    "recon_from_json",
]

TAIL_REL = 1e-14


class PeriodMatrixError(ValueError):
    pass


class ThetaDivisorError(ArithmeticError):
    """The argument hit (a translate of) the theta divisor; caller resamples."""


def validate_period_matrix(Omega: np.ndarray, sym_tol: float = 1e-12) -> np.ndarray:
    Omega = np.atleast_2d(np.asarray(Omega, dtype=complex))
    g = Omega.shape[0]
    if Omega.shape != (g, g):
        raise PeriodMatrixError("period matrix must be square")
    if g and np.abs(Omega - Omega.T).max() > sym_tol * max(1.0, np.abs(Omega).max()):
        raise PeriodMatrixError("period matrix is not symmetric")
    if g:
        try:
            np.linalg.cholesky(Omega.imag)
        except np.linalg.LinAlgError:
            raise PeriodMatrixError("Im(Omega) is not positive definite")
    return Omega


def _lattice_points(Omega: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Integer points inside the ellipsoid that carries the sum's mass.

    Terms decay like exp(-pi (n-c)^t Y (n-c)) around the peak c, so keeping
    the Y-ellipsoid of squared radius lam_min * r^2 (with r sized from the
    smallest eigenvalue of Y) drops a relative tail below TAIL_REL; every
    such point lies in the Euclidean box c +- r.
    """
    g = Omega.shape[0]
    Y = Omega.imag
    lam_min = float(np.linalg.eigvalsh(Y)[0])
    radius = np.sqrt((-np.log(TAIL_REL) + 6.0 + 2.0 * g) / (np.pi * lam_min))
    lo = np.floor(center - radius).astype(int)
    hi = np.ceil(center + radius).astype(int)
    grids = np.meshgrid(*[np.arange(lo[i], hi[i] + 1) for i in range(g)],
                        indexing="ij")
    pts = np.stack([gr.ravel() for gr in grids], axis=-1)
    d = pts - center
    quad = np.einsum("ni,ij,nj->n", d, Y, d)
    return pts[quad <= lam_min * radius**2 + 1e-9]


def theta(W: np.ndarray, Omega: np.ndarray) -> complex:
    """Classical Riemann theta: sum over n of exp(pi i n.Omega.n + 2 pi i n.W)."""
    Omega = validate_period_matrix(Omega)
    g = Omega.shape[0]
    if g == 0:
        return 1.0 + 0j
    W = np.asarray(W, dtype=complex).reshape(g)
    Y = Omega.imag
    center = -np.linalg.solve(Y, W.imag)
    pts = _lattice_points(Omega, center)
    expo = (1j * np.pi * np.einsum("ni,ij,nj->n", pts, Omega, pts)
            + 2j * np.pi * pts @ W)
    # factor out the peak magnitude to avoid overflow
    shift = expo.real.max()
    return complex(np.exp(shift) * np.sum(np.exp(expo - shift)))


@dataclass
class ReconstructionData:
    genus: int
    Omega: np.ndarray           # (g, g)
    abel_shift2: np.ndarray     # in C^g
    abel_shift3: np.ndarray
    kappa: np.ndarray           # divisor translation in C^g
    c0: complex
    c1: complex
    c2: complex
    U: np.ndarray               # flow direction in C^{g+2}

    def __post_init__(self):
        g = int(self.genus)
        self.Omega = validate_period_matrix(self.Omega) if g else np.zeros((0, 0), complex)
        for name in ("abel_shift2", "abel_shift3", "kappa"):
            v = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if v.size != g:
                raise ValueError(f"{name} must live in C^{g}")
            setattr(self, name, v)
        self.U = np.asarray(self.U, dtype=complex).reshape(-1)
        if self.U.size != g + 2:
            raise ValueError(f"flow direction must live in C^{g + 2}")
        for c in (self.c0, self.c1, self.c2):
            if c == 0:
                raise ValueError("reconstruction constants must be nonzero")


def phi_sections(Wt: np.ndarray, data: ReconstructionData) -> tuple[complex, complex, complex]:
    """The three quasi-periodic sections at the extended argument Wt."""
    g = data.genus
    Wt = np.asarray(Wt, dtype=complex).reshape(g + 2)
    W = Wt[:g]
    p0 = theta(W, data.Omega)
    p1 = np.exp(2j * np.pi * Wt[g]) * theta(W + data.abel_shift2, data.Omega)
    p2 = np.exp(2j * np.pi * Wt[g + 1]) * theta(W + data.abel_shift3, data.Omega)
    return complex(p0), complex(p1), complex(p2)


def theta_map(Wt: np.ndarray, data: ReconstructionData,
              divisor_tol: float = 1e-12) -> np.ndarray:
    """Projective image [c0 phi0, c1 phi1, c2 phi2] at Wt + kappa~, unit lift."""
    g = data.genus
    Wt = np.asarray(Wt, dtype=complex).reshape(g + 2)
    shifted = Wt.copy()
    shifted[:g] += data.kappa
    p0, p1, p2 = phi_sections(shifted, data)
    v = np.array([data.c0 * p0, data.c1 * p1, data.c2 * p2], dtype=complex)
    n = np.linalg.norm(v)
    if abs(p0) < divisor_tol * max(1.0, n):
        raise ThetaDivisorError("theta divisor hit; resample the argument")
    return v / n


def flow_line(data: ReconstructionData, w: complex) -> np.ndarray:
    """Real-group homomorphism value w U + conj(w) conj(U) in C^{g+2}."""
    w = complex(w)
    return w * data.U + np.conj(w) * np.conj(data.U)


def reconstruction_from_genus0(d) -> ReconstructionData:
    """Bridge from the closed-form rational data to a genus-0 record."""
    return ReconstructionData(
        genus=0,
        Omega=np.zeros((0, 0), dtype=complex),
        abel_shift2=np.zeros(0, dtype=complex),
        abel_shift3=np.zeros(0, dtype=complex),
        kappa=np.zeros(0, dtype=complex),
        c0=1.0 + 0j,
        c1=d.c1,
        c2=d.c2,
        U=np.asarray(d.U, dtype=complex),
    )


def recon_to_json(d: ReconstructionData) -> str:
    def cvec(v):
        return [[z.real, z.imag] for z in np.asarray(v).reshape(-1)]

    doc = {
        "genus": d.genus,
        "Omega_re": d.Omega.real.tolist(),
        "Omega_im": d.Omega.imag.tolist(),
        "abel_shift2": cvec(d.abel_shift2),
        "abel_shift3": cvec(d.abel_shift3),
        "kappa": cvec(d.kappa),
        "c0": [d.c0.real, d.c0.imag],
        "c1": [complex(d.c1).real, complex(d.c1).imag],
        "c2": [complex(d.c2).real, complex(d.c2).imag],
        "U": cvec(d.U),
    }
    return json.dumps(doc, indent=1)


def recon_from_json(text: str) -> ReconstructionData:
    doc = json.loads(text)
    g = int(doc["genus"])

    def vec(key):
        return np.array([complex(re, im) for re, im in doc[key]], dtype=complex)

    Omega = (np.array(doc["Omega_re"], dtype=float)
             + 1j * np.array(doc["Omega_im"], dtype=float)).reshape(g, g)
    return ReconstructionData(
        genus=g,
        Omega=Omega,
        abel_shift2=vec("abel_shift2"),
        abel_shift3=vec("abel_shift3"),
        kappa=vec("kappa"),
        c0=complex(*doc["c0"]),
        c1=complex(*doc["c1"]),
        c2=complex(*doc["c2"]),
        U=vec("U"),
    )

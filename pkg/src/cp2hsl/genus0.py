"""Closed-form homogeneous HSL tori from rational spectral data.

Everything here is driven by one complex parameter a with 0 < |a| < 1.  The
degree-3 lambda function on the Riemann sphere determines marked points
over lambda in {0, 1, infinity}, residues of lambda^{-1} against two
third-kind differentials give the flow direction U, and the torus is the
exponential map

    f(w) = [1, c1 exp(w A1 - conj(w A1)), c2 exp(w A2 - conj(w A2))]

with A_j = 2 pi i U_j.  The exponents A_j are derived from the residue
values of U (cross-checked by quadrature in the tests); with this pairing
the lattice map w -> (2 Re(w U_1), 2 Re(w U_2)) sends the period lattice to
Z^2 and the Lagrangian angle is exactly linear in Re(w).

The a -> 0 limit (lambda = zeta^3) is a separate closed-form branch: the
generic expressions for the ramification constants degenerate there, while
the minimal torus itself is perfectly regular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Genus0Params",
    "Genus0Data",
    "lambda_of",
    "genus0_data",
    "genus0_immersion",
    "conformal_lagrangian_identity",
    "minimal_limit_data",
    "lattice_coordinates",
]


@dataclass
class Genus0Params:
    a: complex
    minimal_limit: bool = False

    def __post_init__(self):
        self.a = complex(self.a)
        if not self.minimal_limit and not (0.0 < abs(self.a) < 1.0):
            raise ValueError("parameter a must satisfy 0 < |a| < 1")


@dataclass
class Genus0Data:
    a: complex
    O2: complex
    O3: complex
    Cplus: complex
    Cminus: complex
    c1: complex
    c2: complex
    A1: complex
    A2: complex
    U1: np.ndarray  # residue vector at the first zero of lambda, in C^2
    U2: np.ndarray  # residue vector at the second zero
    U: np.ndarray   # flow direction (3 pi i / 2)(U1 + U2), or its a=0 limit
    gamma1: complex
    gamma2: complex

    def lattice_matrix(self) -> np.ndarray:
        """Real-linear map w -> (2 Re(w U_1), 2 Re(w U_2)) as a 2x2 matrix."""
        return np.array([
            [2 * self.U[0].real, -2 * self.U[0].imag],
            [2 * self.U[1].real, -2 * self.U[1].imag],
        ])


def lambda_of(a: complex, zeta) -> np.ndarray | complex:
    """The degree-3 spectral function; poles at zeta = +-1/conj(a) rejected."""
    a = complex(a)
    ab = np.conj(a)
    zeta = np.asarray(zeta, dtype=complex)
    den = ab**2 * zeta**2 - 1.0
    if np.any(np.abs(den) < 1e-13 * max(1.0, abs(ab) ** 2)):
        raise ZeroDivisionError("lambda_of evaluated at a pole")
    out = zeta * (zeta**2 - a**2) / den * (ab**2 - 1.0) / (1.0 - a**2)
    return out if out.shape else complex(out)


def _principal_sqrt(z: complex) -> complex:
    """Square root with nonnegative imaginary part (ties: nonnegative real)."""
    r = np.sqrt(complex(z))
    if r.imag < 0 or (r.imag == 0 and r.real < 0):
        r = -r
    return r


def genus0_data(params: Genus0Params | complex) -> Genus0Data:
    """All closed-form constants of the two-parameter homogeneous family."""
    if not isinstance(params, Genus0Params):
        params = Genus0Params(params)
    if params.minimal_limit:
        return minimal_limit_data()
    a = params.a
    ab = np.conj(a)
    aa4 = abs(a) ** 4

    # fiber over lambda = 1 besides zeta = 1
    p = (1 - aa4) / (1 - ab**2)
    q = (1 - a**2) / (1 - ab**2)
    disc = _principal_sqrt(p * p / 4.0 - q)
    O2 = -p / 2.0 + disc
    O3 = -p / 2.0 - disc

    # squares of the ramification points
    s = _principal_sqrt((aa4 - 1.0) * (aa4 - 9.0))
    Cplus = (3.0 - aa4 + s) / (2.0 * ab**2)
    Cminus = (3.0 - aa4 - s) / (2.0 * ab**2)

    def kfun(z: complex) -> complex:
        return (z**2 - Cplus) / (ab**2 * z**2 - 1.0) * (ab**2 - 1.0) / (1.0 - Cplus)

    c1 = 1.0 / kfun(O2)
    c2 = 1.0 / kfun(O3)

    # residues of lambda^{-1} omega_j at the zeroes zeta = +-a of lambda,
    # with omega_j = (1/2 pi i)(1/(zeta - O_{j+1}) - 1/(zeta - 1)) d zeta
    pref = (1 - aa4) / (2 * a**2 * (1 - ab**2)) / (2j * np.pi)
    U1 = pref * (1 + a) * np.array([(O2 - 1) / (O2 - a), (O3 - 1) / (O3 - a)])
    U2 = pref * (1 - a) * np.array([(O2 - 1) / (O2 + a), (O3 - 1) / (O3 + a)])
    U = (3j * np.pi / 2.0) * (U1 + U2)

    A1 = 2j * np.pi * U[0]
    A2 = 2j * np.pi * U[1]
    gamma1, gamma2 = _lattice_generators(U)
    return Genus0Data(a=a, O2=O2, O3=O3, Cplus=Cplus, Cminus=Cminus,
                      c1=c1, c2=c2, A1=A1, A2=A2, U1=U1, U2=U2, U=U,
                      gamma1=gamma1, gamma2=gamma2)


def _lattice_generators(U: np.ndarray) -> tuple[complex, complex]:
    T = np.array([
        [2 * U[0].real, -2 * U[0].imag],
        [2 * U[1].real, -2 * U[1].imag],
    ])
    det = np.linalg.det(T)
    if abs(det) < 1e-12 * max(1.0, np.abs(T).max() ** 2):
        raise ValueError("degenerate period lattice: flow map is not invertible")
    G = np.linalg.inv(T)
    return complex(G[0, 0], G[1, 0]), complex(G[0, 1], G[1, 1])


def minimal_limit_data() -> Genus0Data:
    """The a = 0 specialization: lambda = zeta^3, the minimal torus.

    Here the fiber over lambda = 1 is the cube roots of unity, the divisor
    can be pushed to 2 * infinity so both constants c_j are 1, and the flow
    direction is the zeta-derivative of the Abel map at the triple zero.
    """
    O2 = np.exp(2j * np.pi / 3.0)
    O3 = np.exp(4j * np.pi / 3.0)
    # omega_j / d zeta at zeta = 0 gives (1 - 1/O_{j+1}) / (2 pi i)
    U = np.array([
        (1.0 - 1.0 / O2) / (2j * np.pi),
        (1.0 - 1.0 / O3) / (2j * np.pi),
    ])
    A1 = 2j * np.pi * U[0]
    A2 = 2j * np.pi * U[1]
    gamma1, gamma2 = _lattice_generators(U)
    # the individual residue vectors diverge as a -> 0; only U survives,
    # so split it evenly to keep the record well-formed
    return Genus0Data(a=0.0, O2=O2, O3=O3, Cplus=np.inf, Cminus=np.inf,
                      c1=1.0 + 0j, c2=1.0 + 0j, A1=A1, A2=A2,
                      U1=U / 2.0, U2=U / 2.0, U=U,
                      gamma1=gamma1, gamma2=gamma2)


def genus0_immersion(data: Genus0Data, w) -> np.ndarray:
    """Unit lift of the torus point at w; broadcasts over array w.

    Returns an array of shape w.shape + (3,).  The exponents
    w A_j - conj(w A_j) are purely imaginary, so the lift components keep
    constant modulus and only the normalization at w = 0 matters.
    """
    w = np.asarray(w, dtype=complex)
    e1 = data.c1 * np.exp(w * data.A1 - np.conj(w * data.A1))
    e2 = data.c2 * np.exp(w * data.A2 - np.conj(w * data.A2))
    Z = np.stack([np.ones_like(e1), e1, e2], axis=-1)
    return Z / np.linalg.norm(Z, axis=-1, keepdims=True)


def conformal_lagrangian_identity(data: Genus0Data) -> float:
    """Relative residual of A1^2|c1|^2 + A2^2|c2|^2 + |c1 c2|^2 (A2-A1)^2."""
    c1s = abs(data.c1) ** 2
    c2s = abs(data.c2) ** 2
    num = (data.A1**2 * c1s + data.A2**2 * c2s
           + c1s * c2s * (data.A2 - data.A1) ** 2)
    den = (abs(data.A1) ** 2 * c1s + abs(data.A2) ** 2 * c2s
           + c1s * c2s * abs(data.A2 - data.A1) ** 2)
    return float(abs(num) / den)


def lattice_coordinates(data: Genus0Data, w) -> np.ndarray:
    """Image of w under the flow map, i.e. (2 Re(w U_1), 2 Re(w U_2))."""
    w = np.asarray(w, dtype=complex)
    return np.stack([
        2 * (w * data.U[0]).real,
        2 * (w * data.U[1]).real,
    ], axis=-1)

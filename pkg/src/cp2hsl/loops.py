"""Truncated Laurent arithmetic for tau-twisted matrix loops.

A loop is stored by its Laurent coefficients on a single reference circle
(taken as |zeta| = 1 for arithmetic; the nominal radius ``epsilon`` is
carried as a diagnostic only).  The value on the partner circle of the
two-circle domain is defined by the reality reflection
``zeta -> 1/conj(zeta)`` composed with ``real_conjugate``, so a general
element of the real loop algebra is represented by an *arbitrary* complex
twisted loop; loops fixed by the reflection carry the ``real`` flag and
loops supported in modes >= 0 carry the ``plus`` flag.

Twist bookkeeping: an algebra loop is twisted when its mode-k coefficient
lies in the i^k-eigenspace of tau (checked by projection defect); a group
loop is twisted when tau(g(zeta)) = g(i zeta) pointwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    apply_tau,
    apply_tau_alg,
    expm_stack,
    frobenius,
    project_eigenspace,
    real_conjugate,
    structure_S_lambda,
)

__all__ = [
    "TwistedLoop",
    "UntwistedLoop",
    "multiply",
    "invert",
    "exp_loop",
    "untwist",
    "retwist",
    "check_tau_untwisted",
    "loop_to_json",
    "loop_from_json",
    "random_twisted_algebra_loop",
    "from_circle",
    "DEFAULT_LIMIT",
    "TAIL_WARN",
]

DEFAULT_LIMIT = 24
TAIL_WARN = 1e-10


@dataclass
class TwistedLoop:
    """Matrix Laurent polynomial sum_k coeffs[k - kmin] zeta^k."""

    coeffs: np.ndarray  # (n, 3, 3) complex
    kmin: int
    epsilon: float = 0.5
    real_flag: bool = False
    plus_flag: bool = False
    limit: int = DEFAULT_LIMIT
    tail: float = 0.0  # coefficient mass dropped by truncating operations

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (3, 3):
            raise ValueError("coeffs must have shape (n, 3, 3)")

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, **kw) -> "TwistedLoop":
        return cls(np.zeros((1, 3, 3), dtype=complex), 0, **kw)

    @classmethod
    def identity(cls, **kw) -> "TwistedLoop":
        c = np.zeros((1, 3, 3), dtype=complex)
        c[0] = np.eye(3)
        return cls(c, 0, real_flag=True, plus_flag=True, **kw)

    @classmethod
    def from_modes(cls, modes: dict[int, np.ndarray], **kw) -> "TwistedLoop":
        if not modes:
            return cls.zero(**kw)
        kmin = min(modes)
        kmax = max(modes)
        c = np.zeros((kmax - kmin + 1, 3, 3), dtype=complex)
        for k, m in modes.items():
            c[k - kmin] = np.asarray(m, dtype=complex)
        return cls(c, kmin, **kw)

    # -- basic queries ------------------------------------------------
    @property
    def kmax(self) -> int:
        return self.kmin + len(self.coeffs) - 1

    def mode(self, k: int) -> np.ndarray:
        i = k - self.kmin
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return np.zeros((3, 3), dtype=complex)

    def modes(self):
        for i, k in enumerate(range(self.kmin, self.kmax + 1)):
            yield k, self.coeffs[i]

    def norm(self) -> float:
        """Sum of Frobenius norms; bounds the sup over the reference circle."""
        return float(sum(np.linalg.norm(c) for c in self.coeffs))

    def copy(self) -> "TwistedLoop":
        return TwistedLoop(
            self.coeffs.copy(), self.kmin, self.epsilon,
            self.real_flag, self.plus_flag, self.limit, self.tail,
        )

    def trim(self, tol: float = 0.0) -> "TwistedLoop":
        mags = np.abs(self.coeffs).reshape(len(self.coeffs), -1).max(axis=1)
        nz = np.nonzero(mags > tol)[0]
        if len(nz) == 0:
            out = TwistedLoop.zero()
        else:
            out = TwistedLoop(
                self.coeffs[nz[0]: nz[-1] + 1].copy(), self.kmin + int(nz[0])
            )
        out.epsilon, out.limit, out.tail = self.epsilon, self.limit, self.tail
        out.real_flag, out.plus_flag = self.real_flag, self.plus_flag
        return out

    # -- evaluation ---------------------------------------------------
    def eval(self, zeta) -> np.ndarray:
        """Value sum_k coeffs[k] zeta^k; zeta may be scalar or an array."""
        zeta = np.asarray(zeta, dtype=complex)
        if np.any(zeta == 0) and self.kmin < 0:
            raise ValueError("eval at zeta = 0 with negative modes present")
        pw = zeta[..., None, None] if zeta.ndim else zeta
        out = np.zeros(zeta.shape + (3, 3), dtype=complex)
        # Horner in zeta from the top mode down, then multiply by zeta^kmin
        for c in self.coeffs[::-1]:
            out = out * pw + c
        if self.kmin != 0:
            out = out * pw ** self.kmin
        return out

    def eval_circle(self, samples: int) -> np.ndarray:
        """Values at the `samples` roots of unity via FFT (exact)."""
        width = self.kmax - self.kmin + 1
        if samples < width:
            raise ValueError("sample count below mode window; modes would alias")
        C = np.zeros((samples, 3, 3), dtype=complex)
        for k, c in self.modes():
            C[k % samples] += c
        return np.fft.ifft(C, axis=0) * samples

    # -- linear structure ----------------------------------------------
    def __add__(self, other: "TwistedLoop") -> "TwistedLoop":
        kmin = min(self.kmin, other.kmin)
        kmax = max(self.kmax, other.kmax)
        c = np.zeros((kmax - kmin + 1, 3, 3), dtype=complex)
        c[self.kmin - kmin: self.kmin - kmin + len(self.coeffs)] += self.coeffs
        c[other.kmin - kmin: other.kmin - kmin + len(other.coeffs)] += other.coeffs
        return TwistedLoop(c, kmin, epsilon=self.epsilon,
                           limit=max(self.limit, other.limit))

    def __sub__(self, other: "TwistedLoop") -> "TwistedLoop":
        return self + (other * (-1.0))

    def __mul__(self, scalar: complex) -> "TwistedLoop":
        out = self.copy()
        out.coeffs = out.coeffs * scalar
        out.real_flag = False
        return out

    __rmul__ = __mul__

    def shift(self, k: int) -> "TwistedLoop":
        """Multiply by zeta^k on the reference circle (per-circle convention)."""
        out = self.copy()
        out.kmin += k
        out.real_flag = False
        out.plus_flag = out.plus_flag and k >= 0
        return out

    def reality_reflect(self) -> "TwistedLoop":
        """The loop zeta -> real_conjugate(value at 1/conj(zeta))."""
        c = real_conjugate(self.coeffs[::-1])
        out = TwistedLoop(c, -self.kmax, epsilon=self.epsilon, limit=self.limit)
        return out

    # -- predicates ----------------------------------------------------
    def twist_defect(self) -> float:
        """Coefficient-form twist defect for algebra loops."""
        d = 0.0
        for k, c in self.modes():
            d = max(d, frobenius(c - _eig_component(c, k)))
        return d

    def group_twist_defect(self, samples: int = 16) -> float:
        zs = np.exp(2j * np.pi * (np.arange(samples) + 0.21) / samples)
        vals = self.eval(zs)
        vals_i = self.eval(1j * zs)
        return max(
            frobenius(apply_tau(vals[m]) - vals_i[m]) for m in range(samples)
        )

    def reality_defect(self) -> float:
        """Coefficient-form reality defect (exact for algebra loops)."""
        d = 0.0
        for k in range(0, max(abs(self.kmin), abs(self.kmax)) + 1):
            d = max(d, frobenius(self.mode(-k) - real_conjugate(self.mode(k))))
        return d

    def unitarity_defect(self, samples: int = 16) -> float:
        """Pointwise group reality check on |zeta| = 1."""
        zs = np.exp(2j * np.pi * (np.arange(samples) + 0.37) / samples)
        vals = self.eval(zs)
        g = np.einsum("mba,mbc->mac", np.conj(vals), vals)
        return float(np.abs(g - np.eye(3)).max())

    def plus_defect(self) -> float:
        return float(sum(np.linalg.norm(c)
                         for k, c in self.modes() if k < 0))


def _eig_component(c: np.ndarray, k: int) -> np.ndarray:
    """Component of c in the i^k eigenspace, tolerating a trace part at k=0 mod 4."""
    tr = np.trace(c) / 3.0
    c0 = c - tr * np.eye(3)
    out = project_eigenspace(c0, k)
    if k % 4 == 0:
        out = out + tr * np.eye(3)
    return out


def random_twisted_algebra_loop(rng: np.random.Generator, nmax: int,
                                mass: float, kmin: int | None = None
                                ) -> TwistedLoop:
    """Random twisted algebra loop with modes in [kmin, nmax], total norm `mass`."""
    lo = -nmax if kmin is None else kmin
    modes = {}
    for k in range(lo, nmax + 1):
        x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        x -= np.trace(x) / 3.0 * np.eye(3)
        modes[k] = project_eigenspace(x, k)
    out = TwistedLoop.from_modes(modes)
    total = out.norm()
    if total > 0:
        out.coeffs *= mass / total
    out.limit = max(DEFAULT_LIMIT, abs(lo), nmax)
    return out


def from_circle(values: np.ndarray, kmin: int, kmax: int, **kw) -> TwistedLoop:
    """Recover Laurent coefficients in [kmin, kmax] from circle samples.

    Modes outside the requested window alias onto it mod `samples`; callers
    choose the sample count large enough that the folded tail is negligible.
    """
    samples = len(values)
    if kmax - kmin + 1 > samples:
        raise ValueError("mode window exceeds sample count")
    C = np.fft.fft(values, axis=0) / samples
    ks = np.arange(kmin, kmax + 1)
    return TwistedLoop(C[ks % samples], kmin, **kw)


def _op_samples(width: int, minimum: int = 64) -> int:
    # multiple of 4 so the sample set is invariant under zeta -> i zeta
    m = max(minimum, 2 * width + 8)
    return 4 * ((m + 3) // 4)


def multiply(a: TwistedLoop, b: TwistedLoop, limit: int | None = None) -> TwistedLoop:
    """Cauchy product, truncated to the mode limit with tail-mass report."""
    n, m = len(a.coeffs), len(b.coeffs)
    full = np.zeros((n + m - 1, 3, 3), dtype=complex)
    for i in range(n):
        full[i: i + m] += np.einsum("ab,kbc->kac", a.coeffs[i], b.coeffs)
    out = TwistedLoop(full, a.kmin + b.kmin, epsilon=a.epsilon)
    out.limit = limit if limit is not None else max(a.limit, b.limit)
    out.plus_flag = a.plus_flag and b.plus_flag
    out.real_flag = a.real_flag and b.real_flag
    return _truncate(out, out.limit, carry=a.tail + b.tail)


def _truncate(loop: TwistedLoop, limit: int, carry: float = 0.0) -> TwistedLoop:
    lo = max(loop.kmin, -limit)
    hi = min(loop.kmax, limit)
    if lo > hi:
        out = TwistedLoop.zero()
        out.tail = loop.norm() + carry
        return out
    dropped = sum(
        np.linalg.norm(c) for k, c in loop.modes() if k < lo or k > hi
    )
    out = TwistedLoop(
        loop.coeffs[lo - loop.kmin: hi - loop.kmin + 1].copy(), lo,
        epsilon=loop.epsilon, real_flag=loop.real_flag,
        plus_flag=loop.plus_flag, limit=limit,
    )
    out.tail = float(dropped) + carry
    return out.trim()


def invert(g: TwistedLoop, samples: int | None = None) -> TwistedLoop:
    """Pointwise inversion on the circle plus one Newton polish in mode space."""
    width = g.kmax - g.kmin + 1
    M = samples or _op_samples(width + 2 * g.limit)
    V = g.eval_circle(M)
    dets = np.linalg.det(V)
    if np.abs(dets).min() < 1e-13:
        raise ValueError("invert: loop is singular on the reference circle")
    Vi = np.linalg.inv(V)
    win = min(M // 2 - 1, max(g.limit, width))
    out = from_circle(Vi, -win, win, epsilon=g.epsilon)
    out.limit = g.limit
    out.real_flag = g.real_flag
    out = out.trim(1e-17)
    return out


def exp_loop(xi: TwistedLoop, t: complex = 1.0,
             samples: int | None = None, limit: int | None = None) -> TwistedLoop:
    """exp(t * xi) by pointwise exponentials at >= 4N+1 roots of unity."""
    width = xi.kmax - xi.kmin + 1
    lim = limit if limit is not None else xi.limit
    M = samples or _op_samples(max(4 * width + 1, 2 * lim))
    V = xi.eval_circle(M)
    E = expm_stack(t * V)
    win = min(M // 2 - 1, lim)
    out = from_circle(E, -win, win, epsilon=xi.epsilon)
    out.limit = lim
    out = out.trim(1e-17)
    # exact tail bound is unavailable; report the aliasing estimate instead
    out.tail = float(np.abs(np.fft.fft(E, axis=0) / M)[M // 2].max())
    return out


# -- untwisting ------------------------------------------------------------


@dataclass
class UntwistedLoop:
    """Loop in lambda = zeta^2 obtained by conjugating with kappa(zeta)."""

    coeffs: np.ndarray  # (n, 3, 3)
    kmin: int

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @property
    def kmax(self) -> int:
        return self.kmin + len(self.coeffs) - 1

    def mode(self, k: int) -> np.ndarray:
        i = k - self.kmin
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return np.zeros((3, 3), dtype=complex)

    def eval(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        pw = lam[..., None, None] if lam.ndim else lam
        out = np.zeros(lam.shape + (3, 3), dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * pw + c
        if self.kmin != 0:
            out = out * pw ** self.kmin
        return out


def untwist(g: TwistedLoop, tol: float = 1e-8) -> UntwistedLoop:
    """kappa^{-1} g kappa re-indexed in lambda = zeta^2.

    Requires the sigma-grading of the twist (even modes block-diagonal, odd
    modes block-anti-diagonal); rejects loops that violate it.
    """
    defect = 0.0
    mmin = _floor_div2(g.kmin - 1)
    mmax = _ceil_div2(g.kmax + 1)
    c = np.zeros((mmax - mmin + 1, 3, 3), dtype=complex)
    for k, ck in g.modes():
        if k % 2 == 0:
            off = np.zeros((3, 3), dtype=complex)
            off[:2, 2] = ck[:2, 2]
            off[2, :2] = ck[2, :2]
            defect = max(defect, frobenius(off))
            m = k // 2
            c[m - mmin][:2, :2] += ck[:2, :2]
            c[m - mmin][2, 2] += ck[2, 2]
        else:
            diag = ck.copy()
            diag[:2, 2] = 0.0
            diag[2, :2] = 0.0
            defect = max(defect, frobenius(diag))
            # u-column of mode k lands at lambda^((k-1)/2), v-row at lambda^((k+1)/2)
            mu = (k - 1) // 2
            mv = (k + 1) // 2
            c[mu - mmin][:2, 2] += ck[:2, 2]
            c[mv - mmin][2, :2] += ck[2, :2]
    if defect > tol * max(1.0, g.norm()):
        raise ValueError(f"untwist: twist-invariant violation, defect {defect:.3e}")
    out = UntwistedLoop(c, mmin)
    return _utrim(out)


def retwist(u: UntwistedLoop) -> TwistedLoop:
    kmin = 2 * u.kmin - 1
    kmax = 2 * u.kmax + 1
    c = np.zeros((kmax - kmin + 1, 3, 3), dtype=complex)
    for m in range(u.kmin, u.kmax + 1):
        cm = u.mode(m)
        c[2 * m - kmin][:2, :2] += cm[:2, :2]
        c[2 * m - kmin][2, 2] += cm[2, 2]
        c[2 * m + 1 - kmin][:2, 2] += cm[:2, 2]
        c[2 * m - 1 - kmin][2, :2] += cm[2, :2]
    return TwistedLoop(c, kmin).trim()


def _floor_div2(k: int) -> int:
    return k // 2


def _ceil_div2(k: int) -> int:
    return -((-k) // 2)


def _utrim(u: UntwistedLoop) -> UntwistedLoop:
    mags = np.abs(u.coeffs).reshape(len(u.coeffs), -1).max(axis=1)
    nz = np.nonzero(mags > 0.0)[0]
    if len(nz) == 0:
        return UntwistedLoop(np.zeros((1, 3, 3), dtype=complex), 0)
    return UntwistedLoop(u.coeffs[nz[0]: nz[-1] + 1], u.kmin + int(nz[0]))


def check_tau_untwisted(u: UntwistedLoop, kind: str = "group",
                        samples: int = 16) -> float:
    """Max defect of the lambda-loop symmetry over sampled unit lambda.

    group:   g(-lambda) = S_lambda^{-1} g(lambda)^* S_lambda
    algebra: x(-lambda) = -S_lambda^{-1} x(lambda)^t S_lambda
    """
    lams = np.exp(2j * np.pi * (np.arange(samples) + 0.13) / samples)
    d = 0.0
    for lam in lams:
        S = structure_S_lambda(lam)
        Si = np.linalg.inv(S)
        left = u.eval(-lam)
        v = u.eval(lam)
        if kind == "group":
            right = Si @ np.linalg.inv(v.T) @ S
        elif kind == "algebra":
            right = -Si @ v.T @ S
        else:
            raise ValueError("kind must be 'group' or 'algebra'")
        d = max(d, frobenius(left - right))
    return d


# -- JSON interchange -------------------------------------------------------


def loop_to_json(loop: TwistedLoop) -> str:
    modes = []
    for k, c in loop.modes():
        modes.append({
            "k": int(k),
            "re": c.real.tolist(),
            "im": c.imag.tolist(),
        })
    doc = {
        "modes": modes,
        "epsilon": loop.epsilon,
        "flags": {"real": bool(loop.real_flag), "plus": bool(loop.plus_flag)},
    }
    return json.dumps(doc, indent=1)


def loop_from_json(text: str) -> TwistedLoop:
    doc = json.loads(text)
    modes = {}
    for entry in doc["modes"]:
        modes[int(entry["k"])] = (
            np.array(entry["re"], dtype=float)
            + 1j * np.array(entry["im"], dtype=float)
        )
    flags = doc.get("flags", {})
    out = TwistedLoop.from_modes(modes) if modes else TwistedLoop.zero()
    out.epsilon = float(doc.get("epsilon", 0.5))
    out.real_flag = bool(flags.get("real", False))
    out.plus_flag = bool(flags.get("plus", False))
    out.limit = max(DEFAULT_LIMIT, abs(out.kmin), abs(out.kmax))
    return out

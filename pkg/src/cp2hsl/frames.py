"""Vacuum frames, the dressing action, and Maurer-Cartan machinery.

A frame field is a grid of twisted group loops F(w).  The vacuum for a
constant Maslov datum mu0 is the diagonal exponential
exp(w zeta^{-2} A + conj(w) zeta^2 Abar) with A = i pi conj(mu0) diag(1,1,-2);
its Laurent modes are Bessel-type double series computed here to a
requested tail so the support adapts to |w A|.  Dressing left-multiplies by
a plus loop and keeps the annulus factor of the factorization; the
Maurer-Cartan form of any frame field is extracted by 4th-order central
differences pointwise on the evaluation circle and carries its own
flatness, support and reality diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .algebra import D_MASLOV, frobenius, real_conjugate, apply_tau
from .loops import TwistedLoop, from_circle, multiply, invert
from .factorization import iwasawa_factorize, ConvergenceError
from .geomverify import ImmersionSample

__all__ = [
    "GridSpec",
    "VacuumData",
    "ExtendedFrameField",
    "MaurerCartanField",
    "vacuum_frame",
    "vacuum_frame_field",
    "dress",
    "compute_chi",
    "maurer_cartan",
    "mc_residual",
    "integrate_frame",
    "frames_gauge_equivalent",
    "immersion_from_frame",
]


@dataclass
class GridSpec:
    """Axis-aligned rectangular grid centered at the origin."""

    n1: int = 16
    n2: int = 16
    size1: float = 0.5
    size2: float = 0.5

    @property
    def h1(self) -> float:
        return self.size1 / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return self.size2 / (self.n2 - 1)

    def w(self) -> np.ndarray:
        xs = -self.size1 / 2.0 + self.h1 * np.arange(self.n1)
        ys = -self.size2 / 2.0 + self.h2 * np.arange(self.n2)
        return xs[:, None] + 1j * ys[None, :]

    def base_index(self) -> tuple[int, int]:
        """Grid point nearest the origin."""
        W = self.w()
        flat = int(np.argmin(np.abs(W)))
        return flat // self.n2, flat % self.n2

    def refine(self, factor: int) -> "GridSpec":
        return GridSpec((self.n1 - 1) * factor + 1, (self.n2 - 1) * factor + 1,
                        self.size1, self.size2)


@dataclass
class VacuumData:
    """Constant Maslov datum: -mu = conj(mu0) dw + mu0 dwbar."""

    mu0: complex = 1.0

    @property
    def A(self) -> np.ndarray:
        return 1j * np.pi * np.conj(self.mu0) * D_MASLOV

    @property
    def Abar(self) -> np.ndarray:
        return real_conjugate(self.A)

    def potential(self) -> TwistedLoop:
        """zeta^{-2} A + zeta^2 Abar, the constant generator of the vacuum."""
        return TwistedLoop.from_modes({-2: self.A, 2: self.Abar})


def _bessel_mode(x: complex, y: complex, m: int, tol: float) -> complex:
    """sum_k x^k y^{k+m} / (k! (k+m)!) with term recurrence, k from max(0,-m)."""
    k0 = max(0, -m)
    term = x**k0 * y ** (k0 + m)
    for k in range(2, k0 + 1):
        term /= k
    for k in range(2, k0 + m + 1):
        term /= k
    total = term
    k = k0
    while True:
        k += 1
        term = term * x * y / (k * (k + m))
        total += term
        if abs(term) < tol * (1.0 + abs(total)) and k > abs(x * y) ** 0.5 + 2:
            return total
        if k > 500:
            return total


def _diag_exp_modes(x: complex, y: complex, tol: float) -> dict[int, complex]:
    """Laurent modes of exp(x zeta^{-2} + y zeta^{2}) for scalars x, y.

    Mode 2m carries sum_k x^k y^{k+m} / (k! (k+m)!); modes are collected
    outward from 0 until both signs drop below the relative tail target.
    """
    out = {0: _bessel_mode(x, y, 0, tol)}
    scale = max(1.0, float(np.exp(abs(x) + abs(y))))
    m = 0
    while True:
        m += 1
        cp = _bessel_mode(x, y, m, tol)
        cm = _bessel_mode(x, y, -m, tol)
        keep = False
        if abs(cp) > tol / scale:
            out[2 * m] = cp
            keep = True
        if abs(cm) > tol / scale:
            out[-2 * m] = cm
            keep = True
        if not keep and m > abs(x) + abs(y) + 2:
            return out
        if m > 450:
            return out


def vacuum_frame(vac: VacuumData, w: complex, tol: float = 1e-16) -> TwistedLoop:
    """exp(w zeta^{-2} A + conj(w) zeta^2 Abar), exact diagonal two-mode exponential."""
    w = complex(w)
    A, Ab = vac.A, vac.Abar
    modes: dict[int, np.ndarray] = {}
    for d in range(3):
        md = _diag_exp_modes(w * A[d, d], np.conj(w) * Ab[d, d], tol)
        for k, val in md.items():
            modes.setdefault(k, np.zeros((3, 3), dtype=complex))[d, d] = val
    out = TwistedLoop.from_modes(modes, real_flag=True)
    out.limit = max(abs(out.kmin), abs(out.kmax), 8)
    return out


@dataclass
class ExtendedFrameField:
    grid: GridSpec
    loops: list  # nested [i][j] -> TwistedLoop
    basepoint_gauge: np.ndarray = dc_field(
        default_factory=lambda: np.eye(3, dtype=complex))

    def at(self, i: int, j: int) -> TwistedLoop:
        return self.loops[i][j]

    def map(self, fn) -> "ExtendedFrameField":
        out = [[fn(self.loops[i][j], i, j) for j in range(self.grid.n2)]
               for i in range(self.grid.n1)]
        return ExtendedFrameField(self.grid, out, self.basepoint_gauge)

    def max_support(self) -> int:
        return max(max(abs(L.kmin), abs(L.kmax))
                   for row in self.loops for L in row)


def vacuum_frame_field(vac: VacuumData, grid: GridSpec) -> ExtendedFrameField:
    W = grid.w()
    loops = [[vacuum_frame(vac, W[i, j]) for j in range(grid.n2)]
             for i in range(grid.n1)]
    return ExtendedFrameField(grid, loops)


def dress(g: TwistedLoop, field: ExtendedFrameField,
          samples: int | None = None, tol: float = 1e-11) -> ExtendedFrameField:
    """Annulus factor of g * F(w) per grid point.

    The dressing datum g must be a constant-in-w plus loop.  The result has
    F(0) equal to a constant G0 element (the annulus factor of g itself),
    which is recorded as `basepoint_gauge` rather than translated away.
    Neighbouring grid points warm-start each other's factorization.
    """
    if g.plus_defect() > 1e-10 * max(1.0, g.norm()):
        raise ValueError("dress: datum must be a plus loop")
    grid = field.grid
    base = iwasawa_factorize(g, tol=tol)
    u0 = base.e_part.mode(0)

    sup = field.max_support() + max(abs(g.kmin), abs(g.kmax))
    M = samples or max(4 * ((2 * sup + 16) // 4 + 1), 128)
    out_rows = []
    for i in range(grid.n1):
        row = []
        seed = None
        for j in range(grid.n2):
            prod = multiply(g, field.at(i, j), limit=sup + 4)
            try:
                fac = iwasawa_factorize(prod, samples=M, tol=tol, seed=seed)
            except ConvergenceError as err:
                raise ConvergenceError(
                    f"dressing factorization failed at grid point {(i, j)}: {err}",
                    err.residuals) from err
            seed = (fac.e_part.eval_circle(M), fac.i_part.eval_circle(M))
            row.append(fac.e_part)
        out_rows.append(row)
    return ExtendedFrameField(grid, out_rows, basepoint_gauge=u0)


def compute_chi(g: TwistedLoop, vacuum_field: ExtendedFrameField,
                dressed_field: ExtendedFrameField) -> list:
    """chi(w) = F(w)^{-1} g F_vac(w) per grid point (plus loop, B constant term)."""
    grid = dressed_field.grid
    out = []
    for i in range(grid.n1):
        row = []
        for j in range(grid.n2):
            Finv = invert(dressed_field.at(i, j))
            chi = multiply(multiply(Finv, g), vacuum_field.at(i, j))
            chi.plus_flag = True
            row.append(chi)
        out.append(row)
    return out


_FD4 = (2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)


def _fd_axis(V: np.ndarray, axis: int, h: float, step: int = 1) -> np.ndarray:
    """4th-order first derivative along a grid axis with stride `step`."""
    reach, wts = _FD4
    r = reach * step
    n = V.shape[axis]
    out = np.full_like(V, np.nan)
    core = np.zeros_like(np.take(V, range(r, n - r), axis=axis))
    for off, wt in zip(range(-reach, reach + 1), wts):
        if wt == 0.0:
            continue
        core = core + wt * np.take(V, range(r + off * step, n - r + off * step),
                                   axis=axis)
    sl = [slice(None)] * V.ndim
    sl[axis] = slice(r, n - r)
    out[tuple(sl)] = core / (h * step)
    return out


def _field_samples(field: ExtendedFrameField, M: int) -> np.ndarray:
    grid = field.grid
    V = np.empty((grid.n1, grid.n2, M, 3, 3), dtype=complex)
    for i in range(grid.n1):
        for j in range(grid.n2):
            V[i, j] = field.at(i, j).eval_circle(M)
    return V


@dataclass
class MaurerCartanField:
    """dz and dzbar parts of F^{-1} dF, Laurent modes -2..2 per grid point."""

    grid: GridSpec
    P: np.ndarray            # (n1, n2, 5, 3, 3), dz part, modes -2..2
    Q: np.ndarray            # (n1, n2, 5, 3, 3), dzbar part
    valid: np.ndarray        # (n1, n2) cells with full stencils
    support_defect: float    # coefficient mass outside the -2..2 window
    reality_defect: float    # max |Q_{-j} - real_conjugate(P_j)|
    richardson: float        # h vs 2h stencil disagreement

    def mode_P(self, k: int) -> np.ndarray:
        return self.P[:, :, k + 2]

    def mode_Q(self, k: int) -> np.ndarray:
        return self.Q[:, :, k + 2]

    def alpha_minus1_norms(self) -> np.ndarray:
        out = np.linalg.norm(self.mode_P(-1), axis=(-2, -1))
        return np.where(self.valid, out, np.nan)

    def conformality_defect(self) -> float:
        """Mass of the dzbar part at mode -1 (weak conformality says zero)."""
        vals = np.linalg.norm(self.mode_Q(-1), axis=(-2, -1))
        return float(np.nanmax(np.where(self.valid, vals, np.nan)))


def maurer_cartan(field: ExtendedFrameField, samples: int | None = None,
                  richardson_tol: float = 1e-2) -> MaurerCartanField:
    """alpha = F^{-1} dF by 4th-order central differences, modes read per point."""
    grid = field.grid
    if grid.n1 < 9 or grid.n2 < 9:
        raise ValueError("grid too small for the Richardson cross-check")
    sup = field.max_support()
    M = samples or max(4 * ((2 * sup + 10) // 4 + 1), 64)
    V = _field_samples(field, M)
    Vinv = np.linalg.inv(V)
    Vx = _fd_axis(V, 0, grid.h1)
    Vy = _fd_axis(V, 1, grid.h2)
    ax = np.einsum("ijmab,ijmbc->ijmac", Vinv, Vx)
    ay = np.einsum("ijmab,ijmbc->ijmac", Vinv, Vy)
    aP = (ax - 1j * ay) / 2.0
    aQ = (ax + 1j * ay) / 2.0

    # Richardson: same derivative with doubled step
    Vx2 = _fd_axis(V, 0, grid.h1, step=2)
    Vy2 = _fd_axis(V, 1, grid.h2, step=2)
    with np.errstate(invalid="ignore"):
        dscale = max(np.nanmax(np.abs(Vx)), np.nanmax(np.abs(Vy)), 1.0)
        rich = np.nanmax(np.abs(Vx - Vx2)) if np.isfinite(Vx2).any() else np.nan
        rich = max(rich, np.nanmax(np.abs(Vy - Vy2))
                   if np.isfinite(Vy2).any() else np.nan)
    rich = float(rich / dscale)
    if np.isfinite(rich) and rich > richardson_tol:
        raise ValueError(
            f"maurer_cartan: step size too coarse, Richardson defect {rich:.3e}")

    valid = np.isfinite(aP).all(axis=(2, 3, 4)) & np.isfinite(aQ).all(axis=(2, 3, 4))
    C_P = np.fft.fft(np.where(valid[:, :, None, None, None], aP, 0.0), axis=2) / M
    C_Q = np.fft.fft(np.where(valid[:, :, None, None, None], aQ, 0.0), axis=2) / M
    ks = np.arange(-2, 3)
    P = C_P[:, :, ks % M]
    Q = C_Q[:, :, ks % M]
    inside = np.zeros(M, dtype=bool)
    inside[ks % M] = True
    tailP = np.abs(C_P[:, :, ~inside]).sum(axis=(2, 3, 4))
    tailQ = np.abs(C_Q[:, :, ~inside]).sum(axis=(2, 3, 4))
    support_defect = float(np.max((tailP + tailQ)[valid])) if valid.any() else np.nan

    rdef = 0.0
    for k in range(-2, 3):
        diff = Q[:, :, -k + 2] - real_conjugate(P[:, :, k + 2])
        rdef = max(rdef, float(np.max(np.abs(diff)[valid])) if valid.any() else 0.0)
    return MaurerCartanField(grid, P, Q, valid, support_defect, rdef, rich)


def _contract_modes(C: np.ndarray, zeta: complex) -> np.ndarray:
    ks = np.arange(-2, 3)
    pw = zeta**ks
    return np.einsum("k,ijkab->ijab", pw, C)


def mc_residual(mcf: MaurerCartanField, n_zeta: int = 8) -> float:
    """Max flatness defect d(alpha) + [alpha wedge alpha]/2 over grid and zeta."""
    grid = mcf.grid
    zs = np.exp(2j * np.pi * (np.arange(n_zeta) + 0.29) / n_zeta)
    worst = 0.0
    Pn = np.where(mcf.valid[:, :, None, None, None], mcf.P, np.nan)
    Qn = np.where(mcf.valid[:, :, None, None, None], mcf.Q, np.nan)
    for z in zs:
        P = _contract_modes(Pn, z)
        Q = _contract_modes(Qn, z)
        Px = _fd_axis(P, 0, grid.h1)
        Py = _fd_axis(P, 1, grid.h2)
        Qx = _fd_axis(Q, 0, grid.h1)
        Qy = _fd_axis(Q, 1, grid.h2)
        Pzb = (Px + 1j * Py) / 2.0
        Qz = (Qx - 1j * Qy) / 2.0
        comm = np.einsum("ijab,ijbc->ijac", P, Q) - np.einsum(
            "ijab,ijbc->ijac", Q, P)
        res = Qz - Pzb + comm
        good = np.isfinite(res).all(axis=(2, 3))
        if good.any():
            worst = max(worst, float(np.abs(res[good]).max()))
    return worst


def _interp_row(C: np.ndarray, s: float) -> np.ndarray:
    """Cubic Lagrange interpolation of a mode stack along its leading axis."""
    n = C.shape[0]
    i = int(np.floor(s))
    i = min(max(i, 1), n - 3)
    t = s - i
    w = np.array([
        -t * (t - 1) * (t - 2) / 6.0,
        (t + 1) * (t - 1) * (t - 2) / 2.0,
        -(t + 1) * t * (t - 2) / 2.0,
        (t + 1) * t * (t - 1) / 6.0,
    ])
    return np.einsum("k,k...->...", w, C[i - 1: i + 3])


def integrate_frame(mcf: MaurerCartanField, limit: int = 48,
                    order_check: bool = True) -> ExtendedFrameField:
    """Solve dF = F alpha by RK4 along the base row, then along columns.

    alpha between grid nodes comes from cubic interpolation of the mode
    stacks.  Returns the frame field based at the grid point nearest the
    origin; the column-then-row path difference is reported by
    `frames_gauge_equivalent` style diffing in the tests.
    """
    grid = mcf.grid
    i0, j0 = grid.base_index()
    AX = mcf.P + mcf.Q                 # alpha(d/dx) modes
    AY = 1j * (mcf.P - mcf.Q)          # alpha(d/dy) modes

    def as_loop(modes: np.ndarray) -> TwistedLoop:
        return TwistedLoop(np.array(modes), -2, limit=limit)

    def rk4_path(start: TwistedLoop, stack: np.ndarray, h: float,
                 idx_from: int, idx_to: int) -> list[TwistedLoop]:
        """Integrate from idx_from to idx_to along a 1-d stack of alpha modes."""
        out = {idx_from: start}
        step = 1 if idx_to >= idx_from else -1
        F = start
        for i in range(idx_from, idx_to, step):
            s0, s1 = float(i), float(i + step)
            sm = (s0 + s1) / 2.0
            A0 = as_loop(_interp_row(stack, s0))
            Am = as_loop(_interp_row(stack, sm))
            A1 = as_loop(_interp_row(stack, s1))
            dt = h * step
            k1 = multiply(F, A0, limit=limit)
            k2 = multiply(F + k1 * (dt / 2.0), Am, limit=limit)
            k3 = multiply(F + k2 * (dt / 2.0), Am, limit=limit)
            k4 = multiply(F + k3 * dt, A1, limit=limit)
            F = F + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
            F = F.trim(1e-17)
            F.limit = limit
            out[i + step] = F
            val = F.eval(np.array([1.0 + 0j]))[0]
            if order_check and frobenius(val.conj().T @ val - np.eye(3)) > 1e-4:
                raise ValueError("integrate_frame: unitarity lost at |zeta|=1")
        return [out[k] for k in range(min(idx_from, idx_to),
                                      max(idx_from, idx_to) + 1)]

    loops: list[list] = [[None] * grid.n2 for _ in range(grid.n1)]
    Fbase = TwistedLoop.identity()
    Fbase.limit = limit
    row = rk4_path(Fbase, AX[:, j0], grid.h1, i0, grid.n1 - 1)
    row_lo = rk4_path(Fbase, AX[:, j0], grid.h1, i0, 0)
    for i in range(grid.n1):
        loops[i][j0] = row_lo[i] if i <= i0 else row[i - i0]
    for i in range(grid.n1):
        col_hi = rk4_path(loops[i][j0], AY[i], grid.h2, j0, grid.n2 - 1)
        col_lo = rk4_path(loops[i][j0], AY[i], grid.h2, j0, 0)
        for j in range(grid.n2):
            loops[i][j] = col_lo[j] if j <= j0 else col_hi[j - j0]
    return ExtendedFrameField(grid, loops)


def frames_gauge_equivalent(f1: ExtendedFrameField, f2: ExtendedFrameField,
                            tol: float = 1e-7) -> tuple[bool, float]:
    """True when F1^{-1} F2 is a zeta-independent G0-valued field."""
    if f1.grid != f2.grid:
        raise ValueError("fields live on different grids")
    defect = 0.0
    for i in range(f1.grid.n1):
        for j in range(f1.grid.n2):
            k = multiply(invert(f1.at(i, j)), f2.at(i, j))
            k0 = k.mode(0)
            off = sum(np.linalg.norm(c) for kk, c in k.modes() if kk != 0)
            g0def = frobenius(apply_tau(k0) - k0) if abs(np.linalg.det(k0)) > 1e-8 \
                else 1.0
            unit = frobenius(k0.conj().T @ k0 - np.eye(3))
            defect = max(defect, off, g0def, unit)
    return defect < tol, defect


def immersion_from_frame(field: ExtendedFrameField,
                         unitarity_tol: float = 1e-7) -> ImmersionSample:
    """Grid of unit lifts eval(F(w), 1) e3."""
    grid = field.grid
    n1, n2 = grid.n1, grid.n2
    lifts = np.empty((n1, n2, 3), dtype=complex)
    for i in range(n1):
        for j in range(n2):
            val = field.at(i, j).eval(np.array([1.0 + 0j]))[0]
            if frobenius(val.conj().T @ val - np.eye(3)) > unitarity_tol:
                raise ValueError(
                    f"immersion_from_frame: frame not unitary at zeta=1, point {(i, j)}")
            v = val[:, 2]
            lifts[i, j] = v / np.linalg.norm(v)
    W = grid.w()
    return ImmersionSample(lifts, 1.0, 1j, grid.h1, grid.h2, origin=W[0, 0])

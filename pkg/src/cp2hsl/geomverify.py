"""Independent differential-geometric verification of candidate maps to CP^2.

The input is a grid of unit lifts (no structure from the construction
modules is reused): induced-metric coefficients and the symplectic density
come from central differences of the lifts, projected orthogonal to the
lift; the Lagrangian angle comes from gauging the lifts to horizontality
and reading the phase of the 3x3 determinant against an orthonormalized
tangent pair.  Stencils never cross the grid edge; cells without a full
stencil are excluded from every statistic (the masks record them).

The grid may be skew: positions are w = origin + u e1 + v e2 for complex
frame vectors e1, e2, so lattice fundamental domains verify directly.  The
raw determinant phase on the unit-lift cone is -3 pi times the angle in the
normalization where a flat torus has angle 2 Re(w); ``lagrangian_angle``
divides that calibration out, and it is frozen here once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ImmersionSample",
    "DefectReport",
    "fs_distance",
    "fubini_study_pullbacks",
    "lagrangian_angle",
    "harmonicity_defect",
    "maslov_estimate",
    "branch_point_scan",
    "verify_sample",
    "holomorphic_line_sample",
]

# arg det[Z | u1 | u2] on the unit-lift cone of a flat HSL torus is
# -3 pi (w + wbar); dividing by this constant makes the reported angle
# satisfy beta = 2 Re(w) when the Maslov direction is the real axis
ANGLE_CALIBRATION = -1.0 / (3.0 * np.pi)


@dataclass
class ImmersionSample:
    """Grid of unit lifts with its affine grid geometry.

    lifts[i, j] is the unit vector at w = origin + i*h1*e1 + j*h2*e2 where
    e1, e2 are complex direction vectors (unit steps of the grid axes).
    """

    lifts: np.ndarray          # (n, m, 3) complex, unit rows
    e1: complex
    e2: complex
    h1: float
    h2: float
    origin: complex = 0.0

    def __post_init__(self):
        self.lifts = np.asarray(self.lifts, dtype=complex)
        if self.lifts.ndim != 3 or self.lifts.shape[2] != 3:
            raise ValueError("lifts must have shape (n, m, 3)")
        norms = np.linalg.norm(self.lifts, axis=-1)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("lifts must be unit vectors to 1e-12")

    @property
    def shape(self) -> tuple[int, int]:
        return self.lifts.shape[:2]

    def w_grid(self) -> np.ndarray:
        n, m = self.shape
        I, J = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
        return self.origin + I * self.h1 * self.e1 + J * self.h2 * self.e2


@dataclass
class DefectReport:
    conformality_max: float
    conformality_mean: float
    lagrangian_max: float
    lagrangian_mean: float
    angle_harmonicity: float
    maslov_mu0: complex
    branch_points: list = field(default_factory=list)
    angle_path_dependence: float = 0.0
    excluded_cells: int = 0

    def as_dict(self) -> dict:
        return {
            "conformality_max": self.conformality_max,
            "conformality_mean": self.conformality_mean,
            "lagrangian_max": self.lagrangian_max,
            "lagrangian_mean": self.lagrangian_mean,
            "angle_harmonicity": self.angle_harmonicity,
            "maslov_mu0": [self.maslov_mu0.real, self.maslov_mu0.imag],
            "branch_points": [list(map(int, b)) for b in self.branch_points],
            "angle_path_dependence": self.angle_path_dependence,
            "excluded_cells": int(self.excluded_cells),
        }


def fs_distance(za: np.ndarray, zb: np.ndarray) -> float:
    """Fubini-Study distance of two lifts via the Lagrange identity.

    sin(d)^2 = sum_{i<j} |a_i b_j - a_j b_i|^2 / (|a|^2 |b|^2) avoids the
    catastrophic cancellation of arccos|<a,b>| near coincident points.
    """
    za = np.asarray(za, dtype=complex).reshape(3)
    zb = np.asarray(zb, dtype=complex).reshape(3)
    s2 = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            s2 += abs(za[i] * zb[j] - za[j] * zb[i]) ** 2
    s2 /= float((np.vdot(za, za) * np.vdot(zb, zb)).real)
    return float(np.arcsin(min(1.0, np.sqrt(s2))))


_STENCILS = {
    4: (2, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0),
    6: (3, np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0),
}


def _d1(F: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    """Central first derivative; cells without a full stencil become NaN."""
    reach, wts = _STENCILS[order]
    n = F.shape[axis]
    if n < 2 * reach + 1:
        raise ValueError("grid too small for the requested stencil")
    out = np.full_like(F, np.nan)
    core = np.zeros_like(np.take(F, range(reach, n - reach), axis=axis))
    for off, wt in zip(range(-reach, reach + 1), wts):
        if wt == 0.0:
            continue
        core = core + wt * np.take(F, range(reach + off, n - reach + off), axis=axis)
    sl = [slice(None)] * F.ndim
    sl[axis] = slice(reach, n - reach)
    out[tuple(sl)] = core / h
    return out


def _xy_derivatives(sample: ImmersionSample, F: np.ndarray, order: int):
    """d/dx and d/dy from the two grid-axis derivatives via the frame."""
    Fu = _d1(F, 0, sample.h1, order)
    Fv = _d1(F, 1, sample.h2, order)
    M = np.array([
        [sample.e1.real, sample.e1.imag],
        [sample.e2.real, sample.e2.imag],
    ])
    Mi = np.linalg.inv(M)
    return Mi[0, 0] * Fu + Mi[0, 1] * Fv, Mi[1, 0] * Fu + Mi[1, 1] * Fv


def _herm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...k,...k->...", np.conj(a), b)


def fubini_study_pullbacks(sample: ImmersionSample, order: int = 4):
    """Induced metric E, F, G and symplectic density from FD of the lifts.

    Derivatives are projected orthogonal to the lift (the projective
    correction).  Returns (E, F_mixed, G, omega, valid_mask); F_mixed is the
    real part of the Hermitian pairing and omega its imaginary part.
    """
    Z = sample.lifts
    Zx, Zy = _xy_derivatives(sample, Z, order)
    Px = Zx - _herm(Z, Zx)[..., None] * Z
    Py = Zy - _herm(Z, Zy)[..., None] * Z
    E = _herm(Px, Px).real
    G = _herm(Py, Py).real
    H = _herm(Px, Py)
    valid = np.isfinite(E) & np.isfinite(G)
    return E, H.real, G, H.imag, valid

def _cumtrapz(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:] = np.cumsum((f[1:] + f[:-1]) * 0.5) * h
    return out


def lagrangian_angle(sample: ImmersionSample, order: int = 6):
    """Unwrapped, calibrated Lagrangian angle field.

    Pipeline: gauge the lifts to horizontality by integrating the
    connection i<dZ, Z> along row-then-column grid paths, orthonormalize
    the projected tangent pair, and take the determinant phase; unwrap from
    the first interior cell and divide by the frozen cone calibration.
    Returns (beta, valid_mask, path_defect).  Cells where the tangent pair
    degenerates (branch points) are masked out.
    """
    Z = sample.lifts
    n, m = sample.shape
    reach = _STENCILS[order][0]
    Zu = _d1(Z, 0, sample.h1, order)
    Zv = _d1(Z, 1, sample.h2, order)
    cu = (1j * _herm(Z, Zu)).real
    cv = (1j * _herm(Z, Zv)).real

    mg = reach
    phi = np.full((n, m), np.nan)
    phi[mg:n - mg, mg] = _cumtrapz(cu[mg:n - mg, mg], sample.h1)
    for i in range(mg, n - mg):
        phi[i, mg:m - mg] = phi[i, mg] + _cumtrapz(cv[i, mg:m - mg], sample.h2)
    # path dependence: compare against column-then-row integration
    phi2 = np.full((n, m), np.nan)
    phi2[mg, mg:m - mg] = _cumtrapz(cv[mg, mg:m - mg], sample.h2)
    for j in range(mg, m - mg):
        phi2[mg:n - mg, j] = phi2[mg, j] + _cumtrapz(cu[mg:n - mg, j], sample.h1)
    box = (slice(mg, n - mg), slice(mg, m - mg))
    path_defect = float(np.nanmax(np.abs(phi - phi2)[box]))

    Zg = np.exp(1j * np.where(np.isfinite(phi), phi, 0.0))[..., None] * Z
    Zgx, Zgy = _xy_derivatives(sample, Zg, order)
    Pgx = Zgx - _herm(Zg, Zgx)[..., None] * Zg
    Pgy = Zgy - _herm(Zg, Zgy)[..., None] * Zg

    nx = np.sqrt(np.abs(_herm(Pgx, Pgx).real))
    degenerate = ~(nx > 1e-13 * max(1.0, float(np.nanmax(nx))))
    with np.errstate(invalid="ignore", divide="ignore"):
        u1 = Pgx / nx[..., None]
        r12 = _herm(u1, Pgy)
        u2r = Pgy - r12[..., None] * u1
        n2 = np.sqrt(np.abs(_herm(u2r, u2r).real))
        degenerate |= ~(n2 > 1e-13 * max(1.0, float(np.nanmax(n2))))
        u2 = u2r / n2[..., None]
        dets = np.linalg.det(np.stack([Zg, u1, u2], axis=-1))
    braw = np.angle(dets)

    # the gauge field is only valid inside the first margin; its derivative
    # needs another stencil reach on each side
    m2 = 2 * reach
    valid = np.zeros((n, m), dtype=bool)
    valid[m2:n - m2, m2:m - m2] = True
    valid &= ~degenerate & np.isfinite(braw)

    bu = np.where(valid, braw, np.nan)
    bu[m2:n - m2, m2] = _unwrap_line(bu[m2:n - m2, m2])
    for i in range(m2, n - m2):
        row = bu[i, m2:m - m2]
        if i > m2 and np.isfinite(row[0]) and np.isfinite(bu[i - 1, m2]):
            row[0] -= 2 * np.pi * np.round((row[0] - bu[i - 1, m2]) / (2 * np.pi))
        bu[i, m2:m - m2] = _unwrap_line(row)
    beta = bu * ANGLE_CALIBRATION
    return beta, valid, path_defect


def _unwrap_line(line: np.ndarray) -> np.ndarray:
    out = line.copy()
    prev = None
    for k in range(len(out)):
        if not np.isfinite(out[k]):
            continue
        if prev is not None:
            out[k] -= 2 * np.pi * np.round((out[k] - prev) / (2 * np.pi))
        prev = out[k]
    return out


def harmonicity_defect(sample: ImmersionSample, beta: np.ndarray,
                       valid: np.ndarray) -> float:
    """Max interior |Laplacian of beta| on the (possibly skew) grid.

    The flat Laplacian in w-coordinates is expressed through the grid frame:
    (|e2|^2 b_uu - 2 Re(e1 conj(e2)) b_uv + |e1|^2 b_vv) / Im(conj(e1) e2)^2
    up to the grid spacings; for rectangular grids this is the 5-point
    stencil.  Unwrap failures were masked upstream and are excluded here.
    """
    e1, e2 = sample.e1, sample.e2
    h1, h2 = sample.h1, sample.h2
    jac = (np.conj(e1) * e2).imag
    if abs(jac) < 1e-300:
        raise ValueError("degenerate grid frame")
    b = beta
    bss = (np.roll(b, -1, 0) - 2 * b + np.roll(b, 1, 0)) / h1**2
    btt = (np.roll(b, -1, 1) - 2 * b + np.roll(b, 1, 1)) / h2**2
    bst = (np.roll(np.roll(b, -1, 0), -1, 1) - np.roll(np.roll(b, -1, 0), 1, 1)
           - np.roll(np.roll(b, 1, 0), -1, 1) + np.roll(np.roll(b, 1, 0), 1, 1)
           ) / (4 * h1 * h2)
    lap = (abs(e2) ** 2 * bss
           - 2 * (e1 * np.conj(e2)).real * bst
           + abs(e1) ** 2 * btt) / jac**2
    ok = valid.copy()
    # a roll-based stencil needs all 8 neighbours valid
    for du in (-1, 0, 1):
        for dv in (-1, 0, 1):
            ok &= np.roll(np.roll(valid, du, 0), dv, 1)
    ok[0, :] = ok[-1, :] = False
    ok[:, 0] = ok[:, -1] = False
    if not ok.any():
        raise ValueError("no interior cells left for the harmonicity check")
    return float(np.nanmax(np.abs(lap[ok])))


def maslov_estimate(sample: ImmersionSample, beta: np.ndarray,
                    valid: np.ndarray, order: int = 4) -> complex:
    """Constant mu0 with dbeta = conj(mu0) dw + mu0 dwbar, i.e. (b_x + i b_y)/2."""
    bx, by = _xy_derivatives(sample, beta, order)
    est = (bx + 1j * by) / 2.0
    reach = _STENCILS[order][0]
    ok = valid.copy()
    for ax in (0, 1):
        for off in range(-reach, reach + 1):
            ok &= np.roll(valid, off, ax)
    ok[:reach, :] = ok[-reach:, :] = False
    ok[:, :reach] = ok[:, -reach:] = False
    vals = est[ok & np.isfinite(est)]
    if vals.size == 0:
        raise ValueError("no valid cells for the Maslov estimate")
    return complex(np.mean(vals))


def branch_point_scan(alpha_minus1_norm: np.ndarray,
                      chi1_norm: np.ndarray | None = None,
                      rel_tol: float = 1e-6) -> dict:
    """Cells where the conformal factor collapses.

    Flags cells with |alpha_{-1}| below rel_tol times the grid median; when
    a chi_1 field is supplied its zero set is cross-referenced (the two
    must agree within one cell).  A zero median means the whole field
    vanishes, reported as `degenerate` (the map is not an immersion).
    """
    A = np.asarray(alpha_minus1_norm, dtype=float)
    med = float(np.nanmedian(A))
    if med <= 1e-300:
        return {"degenerate": True, "cells": [], "chi_consistent": None}
    cells = [list(map(int, idx)) for idx in np.argwhere(A < rel_tol * med)]
    out = {"degenerate": False, "cells": cells, "chi_consistent": None}
    if chi1_norm is not None:
        C = np.asarray(chi1_norm, dtype=float)
        cmed = float(np.nanmedian(C))
        chi_cells = set(map(tuple, np.argwhere(C < rel_tol * max(cmed, 1e-300))))
        flagged = set(map(tuple, np.argwhere(A < rel_tol * med)))
        near = lambda c, S: any(abs(c[0] - s[0]) <= 1 and abs(c[1] - s[1]) <= 1
                                for s in S)
        consistent = all(near(c, chi_cells) for c in flagged) and \
            all(near(c, flagged) for c in chi_cells)
        out["chi_consistent"] = bool(consistent) if (flagged or chi_cells) else True
    return out


def verify_sample(sample: ImmersionSample, with_angle: bool = True) -> DefectReport:
    """Full verification battery on one sample grid."""
    E, Fm, G, om, valid = fubini_study_pullbacks(sample)
    scale = E + G
    ok = valid & (scale > 1e-300)
    conf = np.maximum(np.abs(E - G), np.abs(Fm))[ok] / scale[ok]
    lag = np.abs(om[ok]) / scale[ok]
    report = DefectReport(
        conformality_max=float(conf.max()),
        conformality_mean=float(conf.mean()),
        lagrangian_max=float(lag.max()),
        lagrangian_mean=float(lag.mean()),
        angle_harmonicity=np.nan,
        maslov_mu0=complex(np.nan),
        excluded_cells=int((~ok).sum()),
    )
    if with_angle:
        beta, bvalid, pd = lagrangian_angle(sample)
        report.angle_path_dependence = pd
        report.angle_harmonicity = harmonicity_defect(sample, beta, bvalid)
        report.maslov_mu0 = maslov_estimate(sample, beta, bvalid)
    return report


def holomorphic_line_sample(n: int = 32, size: float = 1.0) -> ImmersionSample:
    """w -> [1, w, 0]: a holomorphic (symplectic, non-Lagrangian) control."""
    h = size / n
    xs = (np.arange(n) - n / 2) * h + 0.3
    ys = (np.arange(n) - n / 2) * h + 0.1
    W = xs[:, None] + 1j * ys[None, :]
    Z = np.stack([np.ones_like(W), W, np.zeros_like(W)], axis=-1)
    Z = Z / np.linalg.norm(Z, axis=-1, keepdims=True)
    return ImmersionSample(Z, 1.0, 1j, h, h, origin=complex(xs[0], ys[0]))

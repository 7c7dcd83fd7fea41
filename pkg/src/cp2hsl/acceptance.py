"""End-to-end acceptance battery.

Each criterion function returns a record with the measured quantities, the
tolerances it was held to, and a pass flag; ``run_all`` executes the whole
battery.  The same battery backs `cp2hsl selftest` and the pytest
acceptance module, which prints one line per criterion.
"""

from __future__ import annotations

import time

import numpy as np

from . import genus0 as g0
from . import theta as th
from .algebra import D_MASLOV, expm_stack, frobenius, real_conjugate
from .factorization import algebra_split, iwasawa_factorize
from .frames import (GridSpec, VacuumData, dress, compute_chi, maurer_cartan,
                     mc_residual, vacuum_frame, vacuum_frame_field,
                     frames_gauge_equivalent)
from .geomverify import (ImmersionSample, fs_distance, fubini_study_pullbacks,
                         harmonicity_defect, holomorphic_line_sample,
                         lagrangian_angle, maslov_estimate)
from .killing import char_poly_drift, lax_flow, symes_field
from .loops import (TwistedLoop, exp_loop, invert, multiply, untwist,
                    check_tau_untwisted, random_twisted_algebra_loop)

__all__ = ["run_all", "CRITERIA"]

IDENTITY_SAMPLES = [0.1, 0.3, 0.5, 0.7, 0.3 + 0.4j, 0.6j, 0.85]


def genus0_sample(data, n: int = 48) -> ImmersionSample:
    """Lifts over one fundamental domain {s gamma1 + t gamma2}."""
    s = np.arange(n) / n
    t = np.arange(n) / n
    W = s[:, None] * data.gamma1 + t[None, :] * data.gamma2
    lifts = g0.genus0_immersion(data, W)
    return ImmersionSample(
        lifts,
        data.gamma1 / abs(data.gamma1),
        data.gamma2 / abs(data.gamma2),
        abs(data.gamma1) / n,
        abs(data.gamma2) / n,
        origin=0.0,
    )


def criterion_1_identity() -> dict:
    t0 = time.perf_counter()
    residuals = {}
    for a in IDENTITY_SAMPLES:
        residuals[str(a)] = g0.conformal_lagrangian_identity(
            g0.genus0_data(a))
    worst = max(residuals.values())
    dt = time.perf_counter() - t0
    return {
        "name": "genus0 conformal-Lagrangian identity",
        "passed": worst < 1e-10 and dt < 1.0,
        "worst_residual": worst,
        "tolerance": 1e-10,
        "runtime_s": dt,
        "residuals": residuals,
    }


def criterion_2_genus0_geometry(a: complex = 0.5, n: int = 48) -> dict:
    t0 = time.perf_counter()
    data = g0.genus0_data(a)
    sample = genus0_sample(data, n)
    E, Fm, G, om, valid = fubini_study_pullbacks(sample)
    scale = E + G
    conf = float(np.nanmax(np.maximum(np.abs(E - G), np.abs(Fm))[valid]
                           / scale[valid]))
    lag = float(np.nanmax(np.abs(om[valid]) / scale[valid]))
    f0 = g0.genus0_immersion(data, 0.0)
    per = max(fs_distance(f0, g0.genus0_immersion(data, data.gamma1)),
              fs_distance(f0, g0.genus0_immersion(data, data.gamma2)))
    beta, bvalid, _ = lagrangian_angle(sample)
    W = sample.w_grid()
    dev = (beta - 2 * W.real)[bvalid]
    affinity = float(np.ptp(dev))
    harm = harmonicity_defect(sample, beta, bvalid)
    dt = time.perf_counter() - t0
    return {
        "name": "genus0 geometry on a fundamental domain",
        "passed": (conf < 1e-6 and lag < 1e-6 and per < 1e-8
                   and affinity < 1e-5 and harm < 1e-4 and dt < 30.0),
        "conformality": conf,
        "lagrangian": lag,
        "periodicity_fs": per,
        "angle_affinity": affinity,
        "harmonicity": harm,
        "runtime_s": dt,
    }


def criterion_3_minimal_limit(n: int = 96) -> dict:
    t0 = time.perf_counter()
    data = g0.minimal_limit_data()
    sample = genus0_sample(data, n)
    E, Fm, G, om, valid = fubini_study_pullbacks(sample)
    scale = E + G
    conf = float(np.nanmax(np.maximum(np.abs(E - G), np.abs(Fm))[valid]
                           / scale[valid]))
    lag = float(np.nanmax(np.abs(om[valid]) / scale[valid]))
    beta, bvalid, _ = lagrangian_angle(sample)
    mu0 = maslov_estimate(sample, beta, bvalid)
    dt = time.perf_counter() - t0
    return {
        "name": "minimal limit a=0",
        "passed": abs(mu0) < 1e-6 and conf < 1e-7 and lag < 1e-7,
        "maslov_mu0": abs(mu0),
        "conformality": conf,
        "lagrangian": lag,
        "runtime_s": dt,
    }


def criterion_4_factorization(seed: int = 20250809, count: int = 100) -> dict:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    zs16 = np.exp(2j * np.pi * (np.arange(16) + 0.11) / 16)
    worst_rt, worst_idem, worst_split = 0.0, 0.0, 0.0
    for _ in range(count):
        xi = random_twisted_algebra_loop(rng, 16, 0.5)
        resum = algebra_split(xi)
        worst_split = max(worst_split, _resum_defect(xi, *resum))
        g = exp_loop(xi, limit=96)
        fac = iwasawa_factorize(g)
        target = expm_stack(xi.eval(zs16))
        prod = np.einsum("mab,mbc->mac",
                         fac.e_part.eval(zs16), fac.i_part.eval(zs16))
        worst_rt = max(worst_rt, float(np.abs(prod - target).max()))
        refac = iwasawa_factorize(multiply(fac.e_part, fac.i_part))
        drift = max(
            np.abs(refac.e_part.eval(zs16) - fac.e_part.eval(zs16)).max(),
            np.abs(refac.i_part.eval(zs16) - fac.i_part.eval(zs16)).max(),
        )
        worst_idem = max(worst_idem, float(drift))
    oracle = _diagonal_oracle_defect()
    dt = time.perf_counter() - t0
    return {
        "name": "iwasawa factorization round trip",
        "passed": (worst_rt < 1e-8 and worst_idem < 1e-9
                   and worst_split < 1e-15 and oracle < 1e-12 and dt < 60.0),
        "round_trip": worst_rt,
        "idempotence": worst_idem,
        "split_resum": worst_split,
        "diagonal_oracle": oracle,
        "runtime_s": dt,
    }


def _resum_defect(xi, xe, xi_i) -> float:
    lo = min(xi.kmin, xe.kmin, xi_i.kmin)
    hi = max(xi.kmax, xe.kmax, xi_i.kmax)
    d = 0.0
    for k in range(lo, hi + 1):
        d = max(d, float(np.abs(xe.mode(k) + xi_i.mode(k) - xi.mode(k)).max()))
    return d


def _diagonal_oracle_defect() -> float:
    """Closed-form commuting-diagonal factorization vs the Newton kernel."""
    A = -1j * np.pi * D_MASLOV
    Ab = real_conjugate(A)
    z = 0.3 + 0.2j
    g = exp_loop(TwistedLoop.from_modes({-2: z * A, 2: z * Ab}), limit=64)
    fac = iwasawa_factorize(g)
    e_or = exp_loop(TwistedLoop.from_modes({-2: z * A, 2: np.conj(z) * Ab}),
                    limit=64)
    i_or = exp_loop(TwistedLoop.from_modes({2: (z - np.conj(z)) * Ab}),
                    limit=64)
    zs = np.exp(2j * np.pi * (np.arange(16) + 0.07) / 16)
    return float(max(np.abs(fac.e_part.eval(zs) - e_or.eval(zs)).max(),
                     np.abs(fac.i_part.eval(zs) - i_or.eval(zs)).max()))


def criterion_5_symes_vacuum(seed: int = 7) -> dict:
    t0 = time.perf_counter()
    vac = VacuumData(1.0)
    grid = GridSpec(16, 16, 0.5, 0.5)
    eta = vac.potential()
    field = symes_field(eta, grid)
    worst = 0.0
    zs = np.exp(2j * np.pi * (np.arange(12) + 0.05) / 12)
    W = grid.w()
    for i in range(grid.n1):
        for j in range(grid.n2):
            ref = vacuum_frame(vac, W[i, j])
            worst = max(worst, float(np.abs(
                field.at(i, j).eval(zs) - ref.eval(zs)).max()))

    # intertwining on a stored small plus-loop fixture
    rng = np.random.default_rng(seed)
    gfix = _plus_fixture(rng, mass=0.25)
    grid2 = GridSpec(6, 6, 0.3, 0.3)
    adj = multiply(multiply(gfix, eta), invert(gfix))
    left = symes_field(adj.trim(1e-15), grid2)
    right = dress(gfix, symes_field(eta, grid2))
    _, defect = frames_gauge_equivalent(left, right, tol=1e-6)
    dt = time.perf_counter() - t0
    return {
        "name": "symes map vs vacuum and intertwining",
        "passed": worst < 1e-10 and defect < 1e-6,
        "vacuum_match": worst,
        "intertwining_defect": defect,
        "runtime_s": dt,
    }


def _plus_fixture(rng, mass: float = 0.25, nmodes: int = 6) -> TwistedLoop:
    """exp of a random plus-mode potential: a dressing datum in the plus group."""
    xi = random_twisted_algebra_loop(rng, nmodes, mass, kmin=0)
    g = exp_loop(xi, limit=48)
    g.plus_flag = True
    return g


def criterion_6_dressing(seed: int = 11) -> dict:
    t0 = time.perf_counter()
    vac = VacuumData(0.5)
    rng = np.random.default_rng(seed)
    gfix = _plus_fixture(rng, mass=0.3)
    grid = GridSpec(12, 12, 0.3, 0.3)
    vfield = vacuum_frame_field(vac, grid)
    dressed = dress(gfix, vfield)
    mcf = maurer_cartan(dressed)
    support = mcf.support_defect
    coeff = 0.0
    ok = mcf.valid
    A, Ab = vac.A, vac.Abar
    coeff = max(
        float(np.abs(mcf.mode_P(-2)[ok] - A).max()),
        float(np.abs(mcf.mode_Q(2)[ok] - Ab).max()),
    )
    resid = [mc_residual(maurer_cartan(dress(gfix, vacuum_frame_field(vac, g))))
             for g in (grid, grid.refine(2), grid.refine(4))]
    orders = [np.log2(resid[i] / resid[i + 1]) for i in range(2)]
    chi = compute_chi(gfix, vfield, dressed)
    tau_defect, plus_defect = 0.0, 0.0
    for row in chi:
        for c in row:
            tau_defect = max(tau_defect, check_tau_untwisted(untwist(c)))
            plus_defect = max(plus_defect, c.plus_defect())
    dt = time.perf_counter() - t0
    return {
        "name": "dressed vacuum Maurer-Cartan structure",
        "passed": (support < 1e-7 and coeff < 1e-7 and min(orders) > 2.0
                   and tau_defect < 1e-7 and plus_defect < 1e-8),
        "support_defect": support,
        "maslov_coefficient_match": coeff,
        "mc_residuals": resid,
        "refinement_orders": [float(o) for o in orders],
        "chi_tau_defect": tau_defect,
        "chi_plus_defect": plus_defect,
        "runtime_s": dt,
    }


def criterion_7_lax(seed: int = 23, count: int = 10) -> dict:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    lams = np.exp(2j * np.pi * (np.arange(6) + 0.19) / 6) * 1.1
    worst = 0.0
    for _ in range(count):
        xi0 = random_twisted_algebra_loop(rng, 8, 0.5, kmin=-2)
        traj = lax_flow(xi0, d=0, steps=100, dt=1e-2, keep_every=20)
        worst = max(worst, char_poly_drift(traj, lams))

    # commuting flows: x then y vs y then x, halving dt
    xi0 = random_twisted_algebra_loop(rng, 6, 0.4, kmin=-2)
    defects = []
    for dt_step in (2e-2, 1e-2, 5e-3):
        n = int(round(0.1 / dt_step))
        xy = lax_flow(lax_flow(xi0, 0, n, dt_step, 1.0)[-1], 0, n, dt_step, 1j)[-1]
        yx = lax_flow(lax_flow(xi0, 0, n, dt_step, 1j)[-1], 0, n, dt_step, 1.0)[-1]
        diff = 0.0
        for k in range(min(xy.kmin, yx.kmin), max(xy.kmax, yx.kmax) + 1):
            diff = max(diff, float(np.abs(xy.mode(k) - yx.mode(k)).max()))
        defects.append(diff)
    orders = [np.log2(defects[i] / defects[i + 1]) for i in range(2)]
    dtime = time.perf_counter() - t0
    return {
        "name": "lax isospectrality and commuting flows",
        "passed": worst < 1e-8 and min(orders) > 3.0,
        "char_poly_drift": worst,
        "commutation_defects": defects,
        "commutation_orders": [float(o) for o in orders],
        "runtime_s": dtime,
    }


def criterion_8_theta(seed: int = 5) -> dict:
    t0 = time.perf_counter()
    jac = th.theta(np.zeros(1), np.array([[1j]]))
    # direct lattice sum oracle to radius 8
    direct = sum(np.exp(-np.pi * n * n) for n in range(-8, 9))
    jac_defect = max(abs(jac - 1.08643481), abs(jac - direct))

    rng = np.random.default_rng(seed)
    qp = 0.0
    for g in (1, 2, 3):
        for _ in range(5):
            B = rng.normal(size=(g, g))
            Om = rng.normal(size=(g, g)) * 0.3
            Om = (Om + Om.T) / 2 + 1j * (B @ B.T + (0.5 + g / 2) * np.eye(g))
            W = rng.normal(size=g) * 0.4 + 1j * rng.normal(size=g) * 0.4
            base = th.theta(W, Om)
            mvec = rng.integers(-2, 3, size=g)
            shift_int = th.theta(W + mvec, Om)
            qp = max(qp, abs(shift_int - base) / abs(base))
            lat = th.theta(W + Om @ mvec, Om)
            factor = np.exp(-1j * np.pi * mvec @ Om @ mvec
                            - 2j * np.pi * mvec @ W)
            qp = max(qp, abs(lat - factor * base) / max(abs(base), 1e-30))

    data = g0.genus0_data(0.45 + 0.2j)
    recon = th.reconstruction_from_genus0(data)
    comp = 0.0
    for w in (0.0, 0.08 + 0.03j, -0.05 + 0.11j, 0.21 - 0.07j):
        lhs = th.theta_map(th.flow_line(recon, w), recon)
        rhs = g0.genus0_immersion(data, w)
        comp = max(comp, float(np.abs(lhs - rhs).max()))
    dt = time.perf_counter() - t0
    return {
        "name": "theta constants, quasiperiodicity, genus-0 reduction",
        "passed": jac_defect < 1e-8 and qp < 1e-10 and comp < 1e-12,
        "jacobi_defect": float(jac_defect),
        "quasi_periodicity": float(qp),
        "genus0_composition": comp,
        "runtime_s": dt,
    }


def criterion_9_negative_controls(seed: int = 3) -> dict:
    t0 = time.perf_counter()
    # holomorphic line must fail the Lagrangian check with positive density
    sample = holomorphic_line_sample(32)
    E, Fm, G, om, valid = fubini_study_pullbacks(sample)
    lag = np.abs(om[valid]) / (E + G)[valid]
    holo_fails = float(np.min(lag)) > 1e-3 and float(np.min(om[valid])) > 0.0

    # synthetic non-harmonic angle field must fail the harmonicity gate
    n = 32
    h = 1.0 / n
    xs = (np.arange(n) - n / 2) * h
    W = xs[:, None] + 1j * xs[None, :]
    good = np.ones((n, n), dtype=bool)
    dummy = ImmersionSample(
        np.broadcast_to(np.array([1.0, 0, 0], dtype=complex), (n, n, 3)).copy(),
        1.0, 1j, h, h)
    harmonic = harmonicity_defect(dummy, (W**2).real.copy(), good)
    nonharm = harmonicity_defect(dummy, (np.abs(W) ** 2).copy(), good)
    synth_ok = harmonic < 1e-6 and abs(nonharm - 4.0) < 1e-6

    # an off-eigenspace coefficient must fail the twist check
    rng = np.random.default_rng(seed)
    loop = random_twisted_algebra_loop(rng, 6, 0.5)
    base_defect = loop.twist_defect()
    bad = loop.copy()
    wrong = np.zeros((3, 3), dtype=complex)
    if bad.kmin % 2 == 0:
        wrong[0, 2] = 0.01      # odd-class shape at an even mode
    else:
        wrong[0, 0], wrong[1, 1] = 0.01, -0.01
    bad.coeffs[0] = bad.coeffs[0] + wrong
    twist_fails = bad.twist_defect() > 1e-3 and base_defect < 1e-12
    dt = time.perf_counter() - t0
    return {
        "name": "negative controls fail as required",
        "passed": bool(holo_fails and synth_ok and twist_fails),
        "holomorphic_min_lagrangian": float(np.min(lag)),
        "nonharmonic_laplacian": float(nonharm),
        "perturbed_twist_defect": float(bad.twist_defect()),
        "runtime_s": dt,
    }


CRITERIA = [
    criterion_1_identity,
    criterion_2_genus0_geometry,
    criterion_3_minimal_limit,
    criterion_4_factorization,
    criterion_5_symes_vacuum,
    criterion_6_dressing,
    criterion_7_lax,
    criterion_8_theta,
    criterion_9_negative_controls,
]


def run_all() -> list[dict]:
    return [fn() for fn in CRITERIA]

"""Direct minimization on the Nehari constraint and constant estimators.

One driver serves both discretizations (3D box, meridian plane): keep a
divergence-free iterate v, compute the kernel projection w(v), rescale
t (v + w(v)) onto the constraint, and descend along the inverse-Laplacian
preconditioned energy gradient projected back to the divergence-free
(and symmetry) tangent space, with backtracking on the rescaled energy.
On the constraint the energy, the quotient and the constant estimate are
algebraically locked together: J = Q^{3/p} / 3 and S = (3 J)^{p/3} = Q,
so every accepted step lowers all three.

The regularization schedule applies only to the energy gradient for
p < 2 (the density exponent is negative at curl zeros); entries are
relative to the rms curl magnitude and decrease across stages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constraint import ConstraintReport, WvOptions, _solve_w, _WvState
from .diffops import get_workspace
from .fields import Exponents, KernelFieldError, VectorField3, \
    mag_pow_integral
from .meridian import (MeridianField, MeridianWorkspace, curl_adjoint,
                       curl_comps, get_meridian_workspace, inner_w,
                       leray_comps, mag_sq, power_integral, solve_w_meridian)
from .symmetry import class_projector


@dataclass(frozen=True)
class MinimizeOptions:
    max_outer: int = 300
    grad_tol: float = 1e-6
    eps_schedule: tuple = ()  # relative reg levels; () = auto per p
    symmetry: str = "full"
    seed: int = 0
    renormalize_every: int = 1
    wv_tol: float = 1e-8
    wv_max_iter: int = 40
    stall_iters: int = 20
    stall_rel: float = 1e-8

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.eps_schedule:
            eps = tuple(self.eps_schedule)
            if any(e <= 0 for e in eps) or any(
                    a <= b for a, b in zip(eps[1:], eps[:-1])):
                raise ValueError("eps_schedule must be positive, decreasing")

    def schedule(self, e: Exponents) -> tuple:
        if self.eps_schedule:
            return tuple(self.eps_schedule)
        return (1e-3, 1e-5, 1e-7) if e.p < 2.0 else (0.0,)


@dataclass(frozen=True)
class MinimizeReport:
    J_history: np.ndarray
    Q_final: float
    S_estimate: float
    constraint: ConstraintReport
    iterations: int
    wall_time: float
    converged: bool
    grad_norm: float


class _BoxProblem:
    """Nehari-descent adapter for the 3D periodic box."""

    def __init__(self, spec, e: Exponents, opts: MinimizeOptions):
        self.ws = get_workspace(spec)
        self.spec = spec
        self.e = e
        self.opts = opts
        self.vol = spec.cell_volume

    def project(self, v, step: int):
        out = self.ws.leray_arr(v)
        if self.opts.symmetry != "full":
            fld = class_projector(VectorField3(self.spec, out),
                                  self.opts.symmetry)
            out = self.ws.leray_arr(fld.data)
        return out

    def wsolve(self, v, warm, tol):
        opts = WvOptions(tol=tol, max_iter=self.opts.wv_max_iter)
        state, g, info = _solve_w(self.ws, v, self.e, opts, warm)
        return g, info["objective"], state, info

    def scale_warm(self, warm, t):
        if warm is None:
            return None
        return _WvState(t * warm.phi, t * warm.c, warm.alpha)

    def curl_power(self, v):
        C = self.ws.curl_arr(v)
        return mag_pow_integral(C, self.e.p, self.vol), C

    def grad_energy(self, g, C, eps_abs):
        mC = np.stack(kernels.mag_pow_scale(C[0], C[1], C[2],
                                            self.e.p - 2.0, eps_abs))
        term2 = np.stack(kernels.mag_pow_scale(g[0], g[1], g[2],
                                               self.e.p_star - 2.0, 0.0))
        return self.ws.curl_arr(mC) - term2

    def tangent(self, r):
        out = self.ws.leray_arr(r)
        if self.opts.symmetry != "full":
            out = class_projector(VectorField3(self.spec, out),
                                  self.opts.symmetry).data
            out = self.ws.leray_arr(out)
        return out

    def precondition(self, gV):
        return self.ws.leray_arr(self.ws.inv_neg_laplace_arr(gV))

    def inner(self, a, b):
        return self.vol * float(np.sum(a * b))

    def rms_curl(self, C):
        return float(np.sqrt(np.mean(mag_sq_box(C))))


def mag_sq_box(C):
    return C[0] ** 2 + C[1] ** 2 + C[2] ** 2


class _MeridianProblem:
    """Nehari-descent adapter for the axisymmetric classes."""

    def __init__(self, ws: MeridianWorkspace, sym_class: str, e: Exponents,
                 opts: MinimizeOptions):
        self.ws = ws
        self.sym_class = sym_class
        self.e = e
        self.opts = opts
        from .meridian import CLASS_SLOTS
        self.mask = np.array(CLASS_SLOTS[sym_class], dtype=float)[:, None,
                                                                  None]

    def project(self, v, step: int):
        from .meridian import lowpass_comps
        out = lowpass_comps(self.ws, v * self.mask) * self.mask
        if self.sym_class == "T":
            return out  # structurally divergence-free, kernel-orthogonal
        return leray_comps(self.ws, out) * self.mask

    def wsolve(self, v, warm, tol):
        if self.sym_class == "T":
            B = power_integral(self.ws, v, self.e.p_star)
            info = {"m_residual": 0.0, "iterations": 0, "converged": True,
                    "objective": B}
            return v.copy(), B, None, info
        state, g, info = solve_w_meridian(self.ws, v, self.e.p_star,
                                          tol=tol,
                                          max_iter=self.opts.wv_max_iter,
                                          warm=warm)
        return g, info["objective"], state, info

    def scale_warm(self, warm, t):
        if warm is None:
            return None
        return (t * warm[0], t * warm[1])

    def curl_power(self, v):
        C = curl_comps(self.ws, v)
        return power_integral(self.ws, C, self.e.p), C

    def grad_energy(self, g, C, eps_abs):
        aC = (mag_sq(C) + eps_abs ** 2) ** ((self.e.p - 2.0) / 2.0)
        term1 = curl_adjoint(self.ws, aC * C)
        term2 = mag_sq(g) ** ((self.e.p_star - 2.0) / 2.0) * g
        return term1 - term2

    def tangent(self, r):
        return self.project(r, 0)

    def precondition(self, gV):
        out = np.empty_like(gV)
        w = self.ws.wcol
        for i, par in enumerate(("odd", "odd", "even")):
            out[i] = self.ws.stiffness_solve(w * gV[i], parity=par)
        return self.project(out, 0)

    def inner(self, a, b):
        return inner_w(self.ws, a, b)

    def rms_curl(self, C):
        return float(np.sqrt(np.mean(mag_sq(C))))


def _nehari_descent(prob, v0, e: Exponents, opts: MinimizeOptions):
    t0 = time.time()
    v = prob.project(np.array(v0, dtype=np.float64), 0)
    A, C = prob.curl_power(v)
    if A <= 1e-300:
        raise KernelFieldError("kernel field: initial iterate has no curl")

    warm = None
    J_hist = []
    converged = False
    gnorm = np.inf
    last_info = None
    alpha_prev = 1.0
    it_total = 0

    for eps_rel in opts.schedule(e):
        stage_iters = max(opts.max_outer // len(opts.schedule(e)), 1)
        for _ in range(stage_iters):
            it_total += 1
            g, B, warm, last_info = prob.wsolve(v, warm, opts.wv_tol)
            A, C = prob.curl_power(v)
            t = (A / B) ** (1.0 / (e.p_star - e.p))
            v = t * v
            g = t * g
            C = t * C
            warm = prob.scale_warm(warm, t)
            AB = t ** e.p * A
            J = AB / 3.0
            J_hist.append(J)

            eps_abs = eps_rel * prob.rms_curl(C)
            r = prob.grad_energy(g, C, eps_abs)
            gV = prob.tangent(r)
            d = -prob.precondition(gV)
            gnorm = np.sqrt(max(prob.inner(gV, -d), 0.0)) / max(J, 1e-300)
            stalled = (len(J_hist) > opts.stall_iters and
                       abs(J_hist[-opts.stall_iters] - J)
                       <= opts.stall_rel * abs(J))
            if gnorm < opts.grad_tol and stalled:
                converged = True
                break
            if it_total >= opts.max_outer:
                break

            slope = prob.inner(r, d)
            if slope >= 0:
                break  # tangent gradient numerically zero
            alpha = min(4.0 * alpha_prev, 1.0)
            accepted = False
            for _ in range(40):
                v_try = prob.project(v + alpha * d, it_total)
                try:
                    A_t, C_t = prob.curl_power(v_try)
                except KernelFieldError:
                    alpha *= 0.5
                    continue
                if A_t <= 1e-300:
                    alpha *= 0.5
                    continue
                g_t, B_t, warm_t, info_t = prob.wsolve(
                    v_try, prob.scale_warm(warm, 1.0), opts.wv_tol)
                Jt = ((A_t / B_t) ** (e.p / (e.p_star - e.p)) * A_t) / 3.0
                if Jt <= J + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            alpha_prev = alpha
            v, warm, last_info = v_try, warm_t, info_t
        if converged:
            break

    # final tight solve for the report
    g, B, warm, last_info = prob.wsolve(v, warm, min(opts.wv_tol, 1e-10))
    A, C = prob.curl_power(v)
    t = (A / B) ** (1.0 / (e.p_star - e.p))
    v = t * v
    g = t * g
    AB = t ** e.p * A
    J = AB / 3.0
    J_hist.append(J)
    Q = A / B ** (e.p / e.p_star)
    S = (3.0 * J) ** (e.p / 3.0)
    defect = abs(t ** e.p * A - t ** e.p_star * B) / max(
        t ** e.p * A, t ** e.p_star * B)
    rep = MinimizeReport(
        J_history=np.array(J_hist), Q_final=Q, S_estimate=S,
        constraint=ConstraintReport(last_info["m_residual"], defect,
                                    last_info["iterations"],
                                    last_info["converged"]),
        iterations=it_total, wall_time=time.time() - t0,
        converged=converged, grad_norm=gnorm)
    return v, g, rep


def minimize_ground_state(init: VectorField3, e: Exponents,
                          opts: MinimizeOptions = MinimizeOptions()):
    """Minimize J on the Nehari constraint from a 3D initial field.

    Returns (u, report) with u = t (v + w(v)) the final constrained
    iterate; report.S_estimate = (3 J)^{p/3} is a certified upper bound
    for the discrete curl constant (of the symmetry class, if one is
    set).
    """
    prob = _BoxProblem(init.spec, e, opts)
    v, g, rep = _nehari_descent(prob, init.data, e, opts)
    return VectorField3(init.spec, g), rep


def meridian_minimize(init: MeridianField, e: Exponents,
                      opts: MinimizeOptions = MinimizeOptions()):
    """Nehari minimization within an axisymmetric class on the meridian grid."""
    ws = get_meridian_workspace(init.grid)
    prob = _MeridianProblem(ws, init.sym_class, e, opts)
    v, g, rep = _nehari_descent(prob, init.components(), e, opts)
    out = MeridianField.from_components(init.grid, init.sym_class, g)
    return out, rep


def meridian_energy(m: MeridianField, e: Exponents):
    """Energy evaluation of an axisymmetric field (meridian quadrature)."""
    from .energy import EnergyEval
    ws = get_meridian_workspace(m.grid)
    comps = m.components()
    A = power_integral(ws, curl_comps(ws, comps), e.p)
    B = power_integral(ws, comps, e.p_star)
    return EnergyEval(A / e.p - B / e.p_star, A / e.p, B / e.p_star)


# ---------------------------------------------------------------------------
# constant estimators


def estimate_Hp(spec, e: Exponents, opts: MinimizeOptions = MinimizeOptions(),
                init: VectorField3 | None = None) -> float:
    """Minimize |curl v|_p^p / |grad v|_p^p over divergence-free fields.

    The ratio is bounded by 2^{p/2} pointwise on the grid and equals 1
    identically at p = 2; the descent returns an upper estimate of the
    discrete best constant.
    """
    ws = get_workspace(spec)
    vol = spec.cell_volume
    p = e.p
    if init is None:
        from .initfields import random_solenoidal_bump
        init = random_solenoidal_bump(spec, seed=opts.seed)
    v = ws.leray_arr(init.data)

    def jac(v):
        V = ws.fft(v)
        out = np.empty((3, 3) + spec.n)
        for i, k in enumerate((ws.kx, ws.ky, ws.kz)):
            out[i] = ws.ifft(1j * k * V)
        return out  # out[i, j] = d_i v_j

    def ratio_terms(v, eps):
        C = ws.curl_arr(v)
        Gm = jac(v)
        g2 = np.einsum("ijabc,ijabc->abc", Gm, Gm)
        Acurl = vol * kernels.mag_pow_sum(C[0], C[1], C[2], p)
        Bgrad = vol * float(np.sum(g2 ** (p / 2.0)))
        return Acurl, Bgrad, C, Gm, g2

    eps_levels = opts.schedule(e)
    best = np.inf
    for eps_rel in eps_levels:
        for _ in range(max(opts.max_outer // len(eps_levels), 1)):
            A, B, C, Gm, g2 = ratio_terms(v, 0.0)
            R = A / B
            best = min(best, R)
            epsC = eps_rel * float(np.sqrt(np.mean(mag_sq_box(C))))
            epsG = eps_rel * float(np.sqrt(np.mean(g2)))
            aC = np.stack(kernels.mag_pow_scale(C[0], C[1], C[2], p - 2.0,
                                                epsC))
            rA = p * ws.curl_arr(aC)
            aG = (g2 + epsG ** 2) ** ((p - 2.0) / 2.0)
            # -p sum_i d_i(|grad v|^{p-2} d_i v_j), spectrally
            rB = np.zeros_like(v)
            for i, k in enumerate((ws.kx, ws.ky, ws.kz)):
                rB -= p * ws.ifft(1j * k * ws.fft(aG * Gm[i]))
            r = ws.leray_arr((rA - R * rB) / B)
            d = -ws.leray_arr(ws.inv_neg_laplace_arr(r))
            slope = vol * float(np.sum(r * d))
            if slope >= -1e-30:
                break
            alpha = 1.0
            accepted = False
            for _ in range(40):
                vt = ws.leray_arr(v + alpha * d)
                At, Bt, *_ = ratio_terms(vt, 0.0)
                if Bt > 0 and At / Bt <= R + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            v = vt / (Bt ** (1.0 / p))
            if abs(At / Bt - R) <= 1e-10 * R:
                break
    A, B, *_ = ratio_terms(v, 0.0)
    return min(best, A / B)


@dataclass(frozen=True)
class SpEstimate:
    radial: float
    bubble: float

    @property
    def rel_gap(self) -> float:
        return abs(self.radial - self.bubble) / self.bubble


def estimate_Sp(p: float, N: int = 3, **plap_kwargs) -> SpEstimate:
    """Best Sobolev constant by two independent routes.

    Radial Nehari minimization (grid descent) against direct quadrature
    of the explicit extremal profile.
    """
    from .oracles import bubble_S_p
    from .plap import plap_minimize
    rep = plap_minimize(p=p, N=N, **plap_kwargs)
    return SpEstimate(radial=rep.S_estimate, bubble=bubble_S_p(p, N))

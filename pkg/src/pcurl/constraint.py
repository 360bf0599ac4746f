"""Nonlinear projection onto the curl-free kernel and Nehari rescaling.

For v on the grid, ``w_of_v`` finds the unique curl-free w = grad(phi) + c
minimizing the L^{p*} mass of v + w (the constant c covers the torus zero
mode).  The objective is smooth and strictly convex for p* >= 2, and is
minimized by preconditioned nonlinear conjugate gradients in the scalar
potential: one Poisson solve per gradient removes the grid-scale
ill-conditioning and makes the quadratic case p* = 2 converge in a single
unit step, reproducing the linear Helmholtz split exactly.

Optimality is certified by a dual norm: the defect field |g|^{p*-2} g is
projected onto the kernel (gradient part plus mean, one Poisson solve)
and measured in L^{q} with q = p*/(p*-1).  The projection vanishes iff
the weak optimality condition holds against every kernel test field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .diffops import SpectralWorkspace, get_workspace, helmholtz_split
from .fields import Exponents, KernelFieldError, VectorField3, mag_pow_integral


@dataclass(frozen=True)
class WvOptions:
    """Solver options for the kernel projection (config keys ``wv.*``).

    ``tol`` is relative: the dual residual is compared against
    tol * (integral |g|^{p*})^{1/q}, the natural dual scale of the
    defect.  ``smoothing_eps`` regularizes the density for p* < 2 only.
    """

    tol: float = 1e-9
    max_iter: int = 80
    precond: bool = True
    smoothing_eps: float = 0.0


@dataclass(frozen=True)
class ConstraintReport:
    """Residuals certifying constraint membership.

    m_residual is the absolute dual norm of the optimality defect;
    nehari_defect is |A - B| / max(A, B) for A = |curl u|_p^p and
    B = |u|_{p*}^{p*}.  ``converged`` refers to the configured relative
    tolerance of the projection solver.
    """

    m_residual: float
    nehari_defect: float
    iterations: int
    converged: bool


@dataclass
class _WvState:
    """Warm-start data: potential, constant shift, last accepted step."""

    phi: np.ndarray
    c: np.ndarray
    alpha: float = 1.0


def _defect_and_projection(ws: SpectralWorkspace, m: np.ndarray, q_dual: float,
                           cell_vol: float):
    """Kernel projection of the defect field and its L^{q_dual} norm."""
    proj = ws.gradient_part_arr(m)
    dual = mag_pow_integral(proj, q_dual, cell_vol) ** (1.0 / q_dual)
    return proj, dual


def _solve_w(ws: SpectralWorkspace, v: np.ndarray, e: Exponents,
             opts: WvOptions, state: _WvState | None = None):
    """Minimize integral |v + grad(phi) + c|^{p*} over (phi, c).

    Newton-Krylov: the Hessian action is a variable-coefficient
    divergence form, solved inexactly by CG with the factored Poisson
    preconditioner a^{-1/2} (-Laplace)^{-1} a^{-1/2}, a = |g|^{p*-2},
    which absorbs the decay of the coefficient in the far field.  For
    p* = 2 the Hessian is exactly -2 Laplace and one unit Newton step
    reproduces the linear Helmholtz split.

    Returns (state, g, info) where g = v + grad(phi) + c is the projected
    representative and info carries residuals and iteration counts.
    """
    q = e.p_star
    q_dual = e.p_star_conj
    vol = ws.spec.cell_volume
    V = ws.spec.volume
    eps = opts.smoothing_eps

    if state is None:
        phi0 = ws.poisson_arr(-ws.div_arr(v))
        state = _WvState(phi0, -np.mean(v, axis=(1, 2, 3)))
    phi, c = state.phi.copy(), state.c.copy()

    g = v + ws.grad_arr(phi) + c[:, None, None, None]
    F = vol * kernels.mag_pow_sum(g[0], g[1], g[2], q)

    def inner(aphi, ac, bphi, bc):
        return vol * np.sum(aphi * bphi) + V * np.dot(ac, bc)

    converged = False
    it = 0
    dual = np.inf

    for it in range(1, opts.max_iter + 1):
        m = np.stack(kernels.mag_pow_scale(g[0], g[1], g[2], q - 2.0, eps))
        M = ws.fft(m)
        kd = ws.kx * M[0] + ws.ky * M[1] + ws.kz * M[2]
        # dual residual: kernel projection of the defect field
        W = np.stack([ws.kx * kd * ws.inv_k2, ws.ky * kd * ws.inv_k2,
                      ws.kz * kd * ws.inv_k2])
        W[:, 0, 0, 0] = M[:, 0, 0, 0]
        proj = ws.ifft(W)
        dual = mag_pow_integral(proj, q_dual, vol) ** (1.0 / q_dual)
        scale = max(F ** (1.0 / q_dual), 1e-300)
        rel = dual / (opts.tol * scale)
        if rel <= 1.0:
            converged = True
            break

        # L2 gradients: d/dphi = -q div(m); d/dc = q mean(m) (volume metric)
        g_phi = -q * ws.ifft(1j * kd)
        g_c = q * np.mean(m, axis=(1, 2, 3))

        # Hessian coefficient a (I + (q-2) unit(g) x unit(g)) and the
        # factored preconditioner weights; the low quantile floors the
        # weight where the coefficient degenerates (zeros of g) without
        # disturbing smoothly decaying coefficients
        m2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + eps * eps
        a = m2 ** ((q - 2.0) / 2.0)
        floor = max(float(np.quantile(a, 0.02)), 1e-300)
        if opts.precond:
            inv_sa = 1.0 / np.sqrt(a + floor)
        else:
            inv_sa = np.ones_like(a)
        with np.errstate(invalid="ignore", divide="ignore"):
            ghat = np.where(m2 > 0, g / np.sqrt(m2), 0.0)
        c_prec = max(q * (q - 1.0) * float(a.mean()), 1e-300)

        def hess(dphi, dc):
            dg = ws.grad_arr(dphi) + dc[:, None, None, None]
            gdot = ghat[0] * dg[0] + ghat[1] * dg[1] + ghat[2] * dg[2]
            y = a * (dg + (q - 2.0) * gdot * ghat)
            hphi = -q * ws.div_arr(y)
            hc = q * np.mean(y, axis=(1, 2, 3))
            return hphi, hc

        def prec(rphi, rc):
            # phi mean is pure gauge (H annihilates constants), no need
            # to project it away
            return inv_sa * ws.inv_neg_laplace_arr(inv_sa * rphi) / q, \
                rc / c_prec

        # inexact Newton: solve H d = -grad by preconditioned CG; a
        # fixed modest forcing term keeps every outer step contractive
        eta = 0.02
        dphi = np.zeros_like(phi)
        dc = np.zeros(3)
        rphi, rc = -g_phi, -g_c
        zphi, zc = prec(rphi, rc)
        pphi, pc = zphi.copy(), zc.copy()
        rz = inner(rphi, rc, zphi, zc)
        r0 = np.sqrt(inner(rphi, rc, rphi, rc))
        for _ in range(120):
            hphi, hc = hess(pphi, pc)
            php = inner(pphi, pc, hphi, hc)
            if php <= 0:
                break
            alpha_cg = rz / php
            dphi += alpha_cg * pphi
            dc += alpha_cg * pc
            rphi -= alpha_cg * hphi
            rc -= alpha_cg * hc
            if np.sqrt(inner(rphi, rc, rphi, rc)) <= eta * r0:
                break
            zphi, zc = prec(rphi, rc)
            rz_new = inner(rphi, rc, zphi, zc)
            beta = rz_new / rz
            rz = rz_new
            pphi = zphi + beta * pphi
            pc = zc + beta * pc

        slope = inner(g_phi, g_c, dphi, dc)
        if slope >= 0:  # fell out of the convex regime; steepest descent
            dphi, dc = prec(-g_phi, -g_c)
            slope = inner(g_phi, g_c, dphi, dc)

        grad_dir = ws.grad_arr(dphi) + dc[:, None, None, None]
        step = 1.0
        for _ in range(60):
            gt = g + step * grad_dir
            Ft = vol * kernels.mag_pow_sum(gt[0], gt[1], gt[2], q)
            if Ft <= F + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break  # line search exhausted; report best so far
        phi += step * dphi
        c += step * dc
        g = gt
        F = Ft

    info = {"m_residual": dual, "iterations": it, "converged": converged,
            "objective": F}
    return _WvState(phi, c, 1.0), g, info


def w_of_v(v: VectorField3, e: Exponents, opts: WvOptions = WvOptions(),
           warm: _WvState | None = None):
    """Unique curl-free field minimizing the L^{p*} mass of v + w.

    Returns ``(w, report)``; non-convergence within ``opts.max_iter``
    leaves ``report.converged`` false with the last residual (the caller
    decides).
    """
    ws = get_workspace(v.spec)
    state, g, info = _solve_w(ws, v.data, e, opts, warm)
    w = VectorField3(v.spec, g - v.data)
    A = mag_pow_integral(ws.curl_arr(v.data), e.p, v.spec.cell_volume)
    B = info["objective"]
    defect = abs(A - B) / max(A, B) if max(A, B) > 0 else 0.0
    report = ConstraintReport(info["m_residual"], defect,
                              info["iterations"], info["converged"])
    return w, report


def m_residual(u: VectorField3, e: Exponents) -> float:
    """Dual norm of div(|u|^{p*-2} u), the defect of w frozen at zero."""
    ws = get_workspace(u.spec)
    m = np.stack(kernels.mag_pow_scale(u.data[0], u.data[1], u.data[2],
                                       e.p_star - 2.0, 0.0))
    _, dual = _defect_and_projection(ws, m, e.p_star_conj,
                                     u.spec.cell_volume)
    return dual


def nehari_scale(u: VectorField3, e: Exponents,
                 opts: WvOptions = WvOptions()):
    """Rescale t (u + w(u)) onto the Nehari constraint.

    t = (A/B)^{1/(p*-p)} with A = |curl u|_p^p and B = |u+w(u)|_{p*}^{p*};
    the kernel projection scales linearly (w(tu) = t w(u)), so membership
    in the nonlinear divergence constraint survives the rescaling.
    """
    ws = get_workspace(u.spec)
    A = mag_pow_integral(ws.curl_arr(u.data), e.p, u.spec.cell_volume)
    if A <= 0:
        raise KernelFieldError("kernel field: curl vanishes, no rescaling")
    split = helmholtz_split(u)
    state, g, info = _solve_w(ws, split.v.data, e, opts)
    B = info["objective"]
    if B <= 0:
        raise KernelFieldError("kernel field: projected field vanishes")
    t = (A / B) ** (1.0 / (e.p_star - e.p))
    scaled = VectorField3(u.spec, t * g)
    defect = abs(t ** e.p * A - t ** e.p_star * B) / max(
        t ** e.p * A, t ** e.p_star * B)
    report = ConstraintReport(info["m_residual"], defect,
                              info["iterations"], info["converged"])
    return t, scaled, report


def monotone_gap(u1, u2, q: float):
    """Pairing <|u1|^{q-2} u1 - |u2|^{q-2} u2, u1 - u2> for 3-vectors.

    Nonnegative for every q > 1 by convexity of |.|^q; exposed as a test
    utility.  Accepts single vectors or stacked (..., 3) arrays.
    """
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)

    def density(u):
        mag = np.linalg.norm(u, axis=-1, keepdims=True)
        return np.where(mag > 0, mag, 1.0) ** (q - 2.0) * np.where(
            mag > 0, 1.0, 0.0) * u

    gap = np.sum((density(u1) - density(u2)) * (u1 - u2), axis=-1)
    return float(gap) if gap.ndim == 0 else gap

"""Energy, Sobolev-curl quotient, weak-form gradient, strong-form residual.

The energy is J(u) = (1/p) |curl u|_p^p - (1/p*) |u|_{p*}^{p*}.  Its
Riesz gradient uses the self-adjointness of curl on the torus; for p < 2
the density exponent turns negative at curl zeros, so the gradient takes
a smoothing parameter applied inside the magnitude only (the energy value
itself is never regularized).  The strong-form PDE residual is a
diagnostic for oracle fields, not an optimization target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .constraint import WvOptions, _solve_w
from .diffops import get_workspace, helmholtz_split
from .fields import Exponents, KernelFieldError, VectorField3, fd_interior, \
    mag_pow_integral
from .diffops import curl as curl_op


@dataclass(frozen=True)
class EnergyEval:
    """J with its two terms; quotient is filled only when requested."""

    J: float
    curl_term: float
    pstar_term: float
    quotient: float | None = None


def energy_J(u: VectorField3, e: Exponents) -> EnergyEval:
    """Evaluate J(u) with the spectral curl and Riemann sums."""
    ws = get_workspace(u.spec)
    vol = u.spec.cell_volume
    A = mag_pow_integral(ws.curl_arr(u.data), e.p, vol)
    B = mag_pow_integral(u.data, e.p_star, vol)
    return EnergyEval(A / e.p - B / e.p_star, A / e.p, B / e.p_star)


def quotient_Q(v: VectorField3, e: Exponents,
               opts: WvOptions = WvOptions()) -> float:
    """Sobolev-curl quotient |curl v|_p^p / |v + w(v)|_{p*}^p.

    Any value is an upper bound for the discrete best constant.  Fields
    in the curl kernel are rejected (both sides of the underlying
    inequality vanish there).
    """
    ws = get_workspace(v.spec)
    vol = v.spec.cell_volume
    A = mag_pow_integral(ws.curl_arr(v.data), e.p, vol)
    if A <= 0:
        raise KernelFieldError("kernel field: quotient undefined")
    split = helmholtz_split(v)
    _, _, info = _solve_w(ws, split.v.data, e, opts)
    B = info["objective"]
    return A / B ** (e.p / e.p_star)


def grad_J(u: VectorField3, e: Exponents, eps_reg: float = 0.0
           ) -> VectorField3:
    """Riesz representative of J'(u) in L^2.

    curl((|curl u|^2 + eps^2)^{(p-2)/2} curl u) - |u|^{p*-2} u, evaluated
    spectrally.  eps_reg keeps the coefficient finite at curl zeros when
    p < 2; pass 0 for the exact gradient.
    """
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    ws = get_workspace(u.spec)
    C = ws.curl_arr(u.data)
    mC = np.stack(kernels.mag_pow_scale(C[0], C[1], C[2], e.p - 2.0, eps_reg))
    term1 = ws.curl_arr(mC)
    term2 = np.stack(kernels.mag_pow_scale(u.data[0], u.data[1], u.data[2],
                                           e.p_star - 2.0, 0.0))
    return VectorField3(u.spec, term1 - term2)


def pde_residual(u: VectorField3, e: Exponents, mode: str = "fd4") -> float:
    """Relative strong-form residual of the critical curl-curl equation.

    || curl(|curl u|^{p-2} curl u) - |u|^{p*-2} u ||_2 over interior
    nodes, normalized by the same norm of the nonlinearity.  fd modes
    exist for analytic (non-periodic) samples; spectral for grid
    solutions.
    """
    C = curl_op(u, mode)
    mC = np.stack(kernels.mag_pow_scale(C.data[0], C.data[1], C.data[2],
                                        e.p - 2.0, 0.0))
    lhs = curl_op(VectorField3(u.spec, mC), mode).data
    rhs = np.stack(kernels.mag_pow_scale(u.data[0], u.data[1], u.data[2],
                                         e.p_star - 2.0, 0.0))
    if mode == "spectral":
        sl = (slice(None),) * 4
    else:
        w = 2 * fd_interior({"fd2": 2, "fd4": 4}[mode])
        sl = (slice(None), slice(w, -w), slice(w, -w), slice(w, -w))
    diff = lhs[sl] - rhs[sl]
    num = np.sqrt(np.sum(diff * diff))
    den = np.sqrt(np.sum(rhs[sl] * rhs[sl]))
    if den == 0:
        raise ValueError("nonlinearity vanishes; residual undefined")
    return float(num / den)

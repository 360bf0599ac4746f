"""Rotation action about the x3-axis, frame involutions, class projectors.

Pointwise cylinder frames split a field into radial, azimuthal and axial
parts; the two sign involutions keep either the azimuthal part (purely
azimuthal fields) or its complement (meridional fields).  Quarter turns
about the axis are node-exact on the origin-centered grid, so the
four-fold rotation average is an exactly idempotent projector; the full
rotation average over all angles is evaluated spectrally: the azimuthal
mean of a plane wave exp(i k.x) on the ring of radius r is J0(|k_xy| r)
(J1 for the in-plane frame components), so ring averages of the
trigonometric interpolant are computed without interpolation error.
"""

from __future__ import annotations

import numpy as np
from scipy.special import j0, j1

from .diffops import get_workspace
from .fields import GridSpec, VectorField3


def _plane_frames(spec: GridSpec):
    """Unit radial/azimuthal in-plane frame vectors; zero on the axis."""
    X1, X2, _ = spec.mesh()
    r = np.sqrt(X1 * X1 + X2 * X2)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(r > 0, X1 / np.where(r == 0, 1.0, r), 0.0)
        cy = np.where(r > 0, X2 / np.where(r == 0, 1.0, r), 0.0)
    return cx, cy


def o_components(u: VectorField3):
    """Pointwise frame decomposition u = u_rho + u_tau + u_zeta.

    On the axis the in-plane frames are undefined; both in-plane parts
    are set to zero there and the axial slot absorbs the full vector, so
    the three parts always sum to u exactly.
    """
    cx, cy = _plane_frames(u.spec)
    d = u.data
    rho_c = d[0] * cx + d[1] * cy
    tau_c = -d[0] * cy + d[1] * cx
    zeros = np.zeros_like(d[0])
    u_rho = np.stack([rho_c * cx, rho_c * cy, zeros])
    u_tau = np.stack([-tau_c * cy, tau_c * cx, zeros])
    u_zeta = d - u_rho - u_tau
    spec = u.spec
    return (VectorField3(spec, u_rho), VectorField3(spec, u_tau),
            VectorField3(spec, u_zeta))


def apply_T(u: VectorField3) -> VectorField3:
    """Sign involution keeping the azimuthal part: -u_rho + u_tau - u_zeta."""
    u_rho, u_tau, u_zeta = o_components(u)
    return VectorField3(u.spec, -u_rho.data + u_tau.data - u_zeta.data)


def apply_S(u: VectorField3) -> VectorField3:
    """The opposite involution u_rho - u_tau + u_zeta."""
    u_rho, u_tau, u_zeta = o_components(u)
    return VectorField3(u.spec, u_rho.data - u_tau.data + u_zeta.data)


def project_T(u: VectorField3) -> VectorField3:
    """(id + T)/2: keeps exactly the azimuthal frame part."""
    _, u_tau, _ = o_components(u)
    return u_tau


def project_S(u: VectorField3) -> VectorField3:
    """(id + S)/2: keeps the radial and axial frame parts."""
    u_rho, _, u_zeta = o_components(u)
    return VectorField3(u.spec, u_rho.data + u_zeta.data)


def rotate_quarter(u: VectorField3, k: int) -> VectorField3:
    """Node-exact rotation by k quarter turns about the x3-axis.

    (g * u)(x) = g u(g^{-1} x); requires n1 = n2 and L1 = L2.  Node x maps
    to a node because the grid is origin-centered and periodic.
    """
    spec = u.spec
    if spec.n[0] != spec.n[1] or spec.box[0] != spec.box[1]:
        raise ValueError("quarter turns need matching x/y grids")
    k = k % 4
    d = u.data

    def pull(a):
        # sample at g^{-1} x = (x2, -x1): out[i, j] = a[j, (n-i) % n];
        # negation of node -L/2 + i h wraps through the periodic images
        t = np.swapaxes(a, 0, 1)
        return np.roll(t[::-1, :, :], 1, axis=0)

    for _ in range(k):
        d = np.stack([-pull(d[1]), pull(d[0]), pull(d[2])])
    return VectorField3(spec, np.ascontiguousarray(d))


def project_c4(u: VectorField3) -> VectorField3:
    """Average over the node-exact quarter-turn subgroup (idempotent)."""
    acc = u.data.copy()
    for k in (1, 2, 3):
        acc += rotate_quarter(u, k).data
    return VectorField3(u.spec, acc / 4.0)


def _ring_radii(spec: GridSpec):
    X1, X2, _ = spec.mesh()
    r2d = np.sqrt((X1 * X1 + X2 * X2)[:, :, 0])
    flat = np.round(r2d, 12).ravel()
    uniq, inverse = np.unique(flat, return_inverse=True)
    return r2d, uniq, inverse.reshape(r2d.shape)


def ring_average(u: VectorField3) -> VectorField3:
    """Exact azimuthal average of the trig interpolant (the O-projector).

    Works per x3-slice in the 2D Fourier domain: the angular mean of each
    plane wave on the ring of radius r is a Bessel factor, so the average
    needs no interpolation.  Frame components (rho, tau, zeta profiles as
    functions of radius) are re-broadcast onto every node of its ring.
    """
    spec = u.spec
    n1, n2, n3 = spec.n
    cx, cy = _plane_frames(spec)
    _, radii, ring_idx = _ring_radii(spec)

    kx = 2.0 * np.pi * np.fft.fftfreq(n1, d=spec.box[0] / n1)
    ky = 2.0 * np.pi * np.fft.fftfreq(n2, d=spec.box[1] / n2)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    kmag = np.sqrt(KX * KX + KY * KY).ravel()
    with np.errstate(invalid="ignore", divide="ignore"):
        khx = np.where(kmag > 0, KX.ravel() / np.where(kmag == 0, 1, kmag), 0)
        khy = np.where(kmag > 0, KY.ravel() / np.where(kmag == 0, 1, kmag), 0)
    # Bessel pairing tables: rows = distinct radii, cols = plane waves
    Z = radii[:, None] * kmag[None, :]
    T0 = j0(Z) / (n1 * n2)
    T1 = j1(Z) / (n1 * n2)

    d = u.data
    # phase shift: fft index 0 sits at the box corner -L/2, Bessel pairing
    # needs coefficients of exp(i k . x) in centered coordinates
    sgn = np.where((np.arange(n1)[:, None] + np.arange(n2)[None, :]) % 2,
                   -1.0, 1.0).ravel()[:, None]
    F1 = sgn * np.fft.fft2(d[0], axes=(0, 1)).reshape(n1 * n2, n3)
    F2 = sgn * np.fft.fft2(d[1], axes=(0, 1)).reshape(n1 * n2, n3)
    F3 = sgn * np.fft.fft2(d[2], axes=(0, 1)).reshape(n1 * n2, n3)

    # angular means of the frame components, per radius and slice
    rho_bar = np.real((1j * T1) @ (khx[:, None] * F1 + khy[:, None] * F2))
    tau_bar = np.real((1j * T1) @ (khx[:, None] * F2 - khy[:, None] * F1))
    zeta_bar = np.real(T0 @ F3)

    rho_n = rho_bar[ring_idx.ravel(), :]
    tau_n = tau_bar[ring_idx.ravel(), :]
    zeta_n = zeta_bar[ring_idx.ravel(), :]

    cxf = cx[:, :, 0].ravel()[:, None]
    cyf = cy[:, :, 0].ravel()[:, None]
    out = np.stack([
        (rho_n * cxf - tau_n * cyf).reshape(n1, n2, n3),
        (rho_n * cyf + tau_n * cxf).reshape(n1, n2, n3),
        zeta_n.reshape(n1, n2, n3),
    ])
    return VectorField3(spec, out)


def class_projector(u: VectorField3, sym_class: str,
                    ring: bool = False) -> VectorField3:
    """Discrete projector for a symmetry class.

    The default combines the exact quarter-turn average with the exact
    frame projector (idempotent to machine precision); ``ring=True``
    replaces the quarter-turn average by the full spectral ring average.
    """
    if sym_class == "full":
        return u
    out = ring_average(u) if ring else project_c4(u)
    if sym_class == "T":
        out = project_T(out)
    elif sym_class == "S":
        out = project_S(out)
    elif sym_class != "O":
        raise ValueError(f"unknown symmetry class {sym_class!r}")
    return out


def projector_defect(u: VectorField3, sym_class: str) -> float:
    """Max-norm distance of u from its class projection."""
    pu = class_projector(u, sym_class)
    scale = max(float(np.abs(u.data).max()), 1e-300)
    return float(np.abs(pu.data - u.data).max()) / scale

"""Axisymmetric reduction: fields, operators and solves on the (r, z) plane.

Fields invariant under rotations about the x3-axis are handled through
their frame profiles (radial, azimuthal, axial) on a meridian half-plane
grid: staggered radii r_i = (i+1/2) h_r, staggered symmetric z nodes on
(-z_half, z_half).  The domain is treated as truncated, not periodic:
radial stencils fold parity ghosts across the axis (exact symmetry) and
use one-sided rows at the outer edge; z stencils are one-sided at both
ends.  This keeps every derivative a local 4th-order formula and avoids
the wraparound Gibbs layers that slowly decaying fields would produce
with spectral differences.  Integrals carry the 2 pi r weight; the
midpoint-rule axis defect (h^2/24) g'(0) is removed by even extrapolation
of the integrand, so quadrature error is O(h^4) plus the true tail.

Parities in r: radial and azimuthal profiles are odd, axial ones even.
The symmetry classes are structurally invariant: purely azimuthal fields
(one profile), meridional fields (radial+axial), and the full class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

# free profile slots per class: (rho, tau, zeta)
CLASS_SLOTS = {"T": (False, True, False), "S": (True, False, True),
               "O": (True, True, True)}
PARITY = (-1, -1, 1)  # rho, tau odd; zeta even

# 4th-order stencils, all scaled by 1/(12 h)
_C4 = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
_ONESIDED = {
    0: ((0, 1, 2, 3, 4), (-25.0, 48.0, -36.0, 16.0, -3.0)),
    1: ((-1, 0, 1, 2, 3), (-3.0, -10.0, 18.0, -6.0, 1.0)),
}


def _d4_radial(n: int, h: float, parity: int) -> np.ndarray:
    """4th-order d/dr: parity ghosts across the axis, one-sided outer rows."""
    D = np.zeros((n, n))
    for i in range(n - 2):
        for off, c in _C4.items():
            j = i + off
            if j < 0:
                D[i, -1 - j] += parity * c  # r_{-1-j} mirrors r_j
            else:
                D[i, j] += c
    for i in (n - 2, n - 1):
        offs, cs = _ONESIDED[n - 1 - i]
        for off, c in zip(offs, cs):
            D[i, i - off] -= c  # mirrored one-sided stencil
    return D / (12.0 * h)


def _d4_line(n: int, h: float) -> np.ndarray:
    """4th-order d/dz on a truncated line, one-sided at both ends."""
    D = np.zeros((n, n))
    for i in range(2, n - 2):
        for off, c in _C4.items():
            D[i, i + off] += c
    for i in (0, 1):
        offs, cs = _ONESIDED[i]
        for off, c in zip(offs, cs):
            D[i, i + off] += c
    for i in (n - 2, n - 1):
        offs, cs = _ONESIDED[n - 1 - i]
        for off, c in zip(offs, cs):
            D[i, i - off] -= c
    return D / (12.0 * h)


@dataclass(frozen=True)
class MeridianGrid:
    n_r: int
    n_z: int
    r_max: float
    z_half: float

    def __post_init__(self):
        if self.n_r < 8 or self.n_z < 8:
            raise ValueError("meridian grid needs at least 8 nodes per axis")
        if self.r_max <= 0 or self.z_half <= 0:
            raise ValueError("meridian extents must be positive")

    @property
    def h_r(self) -> float:
        return self.r_max / self.n_r

    @property
    def h_z(self) -> float:
        return 2.0 * self.z_half / self.n_z

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.h_r

    @property
    def z(self) -> np.ndarray:
        return -self.z_half + (np.arange(self.n_z) + 0.5) * self.h_z


class MeridianWorkspace:
    """Operator tables for one grid: stencil matrices and cached solvers."""

    def __init__(self, grid: MeridianGrid):
        self.grid = grid
        n_r, n_z = grid.n_r, grid.n_z
        self.r = grid.r
        self.rcol = self.r[:, None]
        self.D_even = _d4_radial(n_r, grid.h_r, +1)
        self.D_odd = _d4_radial(n_r, grid.h_r, -1)
        self.D_z = _d4_line(n_z, grid.h_z)
        # radial quadrature weights: midpoint rule with the axis defect
        # (h^2/24) g'(0) folded into the first two rows (g = r f, f even)
        w = grid.h_r * self.r.copy()
        w[0] -= grid.h_r ** 2 / 24.0 * (9.0 / 8.0)
        w[1] += grid.h_r ** 2 / 24.0 * (1.0 / 8.0)
        self.w_r = w
        self.wcol = w[:, None]
        self.wz = 2.0 * np.pi * grid.h_z
        self._stiff_lu = {}

    def dz(self, f: np.ndarray) -> np.ndarray:
        return f @ self.D_z.T

    def _stiffness(self, parity: str):
        """Sparse Gram operator G^T W G of the gradient (given r-parity)."""
        g = self.grid
        n_r, n_z = g.n_r, g.n_z
        W = sp.diags(np.repeat(self.w_r, n_z))
        Dr = self.D_even if parity == "even" else self.D_odd
        Gr = sp.kron(sp.csr_matrix(Dr), sp.identity(n_z))
        Gz = sp.kron(sp.identity(n_r), sp.csr_matrix(self.D_z))
        K = (Gr.T @ W @ Gr + Gz.T @ W @ Gz).tocsc()
        if parity == "even":
            # gauge: gradients kill constants; pin the mean at one node
            K = (K + sp.csc_matrix(([float(self.w_r[0])], ([0], [0])),
                                   shape=K.shape)).tocsc()
        return K

    def stiffness_solve(self, rhs_w: np.ndarray, parity: str = "even"
                        ) -> np.ndarray:
        """Solve G^T W G phi = rhs_w (rhs already carries the weight).

        For the even parity the right-hand side must be orthogonal to
        constants (every G^T W (...) source is); the pinned gauge fixes
        the free constant, which the caller's gradients never see.  The
        odd parity is nonsingular (the axis reflection kills constants).
        """
        lu = self._stiff_lu.get(parity)
        if lu is None:
            lu = self._stiff_lu[parity] = splu(self._stiffness(parity))
        g = self.grid
        return lu.solve(rhs_w.ravel()).reshape(g.n_r, g.n_z)


_MW_CACHE: dict[tuple, MeridianWorkspace] = {}


def get_meridian_workspace(grid: MeridianGrid) -> MeridianWorkspace:
    key = (grid.n_r, grid.n_z, grid.r_max, grid.z_half)
    ws = _MW_CACHE.get(key)
    if ws is None:
        if len(_MW_CACHE) > 8:
            _MW_CACHE.clear()
        ws = _MW_CACHE[key] = MeridianWorkspace(grid)
    return ws


@dataclass(frozen=True)
class MeridianField:
    """Axisymmetric field as frame profiles on the meridian grid.

    Stored per class: 'T' keeps the azimuthal profile divided by r (the
    scalar multiplying (-x2, x1, 0)); 'S' keeps (alpha, gamma) with alpha
    the radial profile divided by r; 'O' keeps the three frame components
    themselves.
    """

    grid: MeridianGrid
    sym_class: str
    profiles: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.sym_class not in CLASS_SLOTS:
            raise ValueError(f"unknown class {self.sym_class!r}")
        want = {"T": 1, "S": 2, "O": 3}[self.sym_class]
        data = np.asarray(self.profiles, dtype=np.float64)
        if data.shape != (want, self.grid.n_r, self.grid.n_z):
            raise ValueError(f"profiles shape {data.shape} != "
                             f"({want}, {self.grid.n_r}, {self.grid.n_z})")
        if not np.all(np.isfinite(data)):
            raise ValueError("non-finite profile samples")
        object.__setattr__(self, "profiles", data)

    def components(self) -> np.ndarray:
        """Frame components (u_rho, u_tau, u_zeta) as a (3, n_r, n_z) array."""
        g = self.grid
        r = g.r[:, None]
        out = np.zeros((3, g.n_r, g.n_z))
        if self.sym_class == "T":
            out[1] = self.profiles[0] * r
        elif self.sym_class == "S":
            out[0] = self.profiles[0] * r
            out[2] = self.profiles[1]
        else:
            out[:] = self.profiles
        return out

    @classmethod
    def from_components(cls, grid: MeridianGrid, sym_class: str,
                        comps: np.ndarray) -> "MeridianField":
        r = grid.r[:, None]
        if sym_class == "T":
            prof = comps[1:2] / r
        elif sym_class == "S":
            prof = np.stack([comps[0] / r, comps[2]])
        else:
            prof = np.asarray(comps)
        return cls(grid, sym_class, prof)

    def axis_defect(self) -> float:
        """Residual in-plane magnitude extrapolated to the axis.

        Regular axisymmetric fields have vanishing in-plane components at
        r = 0; odd parity enforces it structurally, so this measures how
        well the stored profiles respect it.
        """
        comps = self.components()
        lin = np.abs(9.0 * comps[:2, 0, :] - comps[:2, 1, :]).max() / 8.0
        return float(lin * self.grid.h_r)


def save_meridian(path, m: MeridianField, p: float):
    from .fieldfile import VERSION_MERIDIAN, write_raw
    g = m.grid
    write_raw(path, VERSION_MERIDIAN, (g.n_r, g.n_z, 1),
              (g.r_max, 2.0 * g.z_half, 1.0), p,
              [m.profiles[i] for i in range(m.profiles.shape[0])],
              class_byte=m.sym_class.encode())


def load_meridian(path):
    from .fieldfile import VERSION_MERIDIAN, FieldFormatError, read_raw
    raw = read_raw(path)
    if raw["version"] != VERSION_MERIDIAN:
        raise FieldFormatError(f"{path}: not a meridian file")
    n_r, n_z, _ = raw["dims"]
    r_max, z_tot, _ = raw["lengths"]
    grid = MeridianGrid(n_r, n_z, r_max, z_tot / 2.0)
    prof = np.stack([c[:, :, 0] for c in raw["comps"]])
    return MeridianField(grid, raw["class"].decode(), prof), raw["p"]


# ---------------------------------------------------------------------------
# calculus on frame components


def integrate(ws: MeridianWorkspace, f: np.ndarray) -> float:
    """2 pi * integral of f(r, z) r dr dz (axis-corrected weights)."""
    return ws.wz * float(np.sum(f * ws.wcol))


def mag_sq(comps: np.ndarray) -> np.ndarray:
    return comps[0] ** 2 + comps[1] ** 2 + comps[2] ** 2


def power_integral(ws: MeridianWorkspace, comps: np.ndarray, q: float
                   ) -> float:
    return integrate(ws, mag_sq(comps) ** (q / 2.0))


def curl_comps(ws: MeridianWorkspace, comps: np.ndarray) -> np.ndarray:
    """Curl in the rotating frame: (-dz u_tau, dz u_rho - dr u_zeta,
    (1/r) dr(r u_tau))."""
    u_rho, u_tau, u_zeta = comps
    c_rho = -ws.dz(u_tau)
    c_tau = ws.dz(u_rho) - ws.D_even @ u_zeta
    c_zeta = (ws.D_even @ (ws.rcol * u_tau)) / ws.rcol
    return np.stack([c_rho, c_tau, c_zeta])


def curl_adjoint(ws: MeridianWorkspace, F: np.ndarray) -> np.ndarray:
    """Adjoint of curl_comps in the weighted inner product."""
    F_rho, F_tau, F_zeta = F
    w = ws.wcol
    a_rho = F_tau @ ws.D_z
    a_tau = -(F_rho @ ws.D_z) \
        + ws.rcol * (ws.D_even.T @ (w * F_zeta / ws.rcol)) / w
    a_zeta = -(ws.D_even.T @ (w * F_tau)) / w
    return np.stack([a_rho, a_tau, a_zeta])


def div_comps(ws: MeridianWorkspace, comps: np.ndarray) -> np.ndarray:
    return (ws.D_even @ (ws.rcol * comps[0])) / ws.rcol + ws.dz(comps[2])


def grad_comps(ws: MeridianWorkspace, phi: np.ndarray) -> np.ndarray:
    return np.stack([ws.D_even @ phi, np.zeros_like(phi), ws.dz(phi)])


def grad_adjoint_w(ws: MeridianWorkspace, comps: np.ndarray) -> np.ndarray:
    """G^T W applied to (u_rho, ., u_zeta); result carries the weight."""
    return ws.D_even.T @ (ws.wcol * comps[0]) \
        + (ws.wcol * comps[2]) @ ws.D_z


def inner_w(ws: MeridianWorkspace, a: np.ndarray, b: np.ndarray) -> float:
    return ws.wz * float(np.sum(a * b * ws.wcol))


def leray_comps(ws: MeridianWorkspace, comps: np.ndarray) -> np.ndarray:
    """Remove the gradient part and the axial mean (kernel directions)."""
    phi = ws.stiffness_solve(grad_adjoint_w(ws, comps))
    out = comps - grad_comps(ws, phi)
    w = ws.wcol * np.ones_like(comps[2])
    out[2] -= float(np.sum(out[2] * w)) / float(np.sum(w))
    return out


# ---------------------------------------------------------------------------
# kernel projection on the meridian grid (classes S and O)


def solve_w_meridian(ws: MeridianWorkspace, comps: np.ndarray, q: float,
                     tol: float = 1e-9, max_iter: int = 60, warm=None):
    """Minimize the weighted L^q mass of comps + grad(phi) + c zhat.

    Same Newton-Krylov scheme as the box solver: CG on the Hessian with
    the factored stiffness preconditioner; the axial constant c covers
    the kernel direction that is not a meridian gradient.  Returns
    (state, g, info) with state = (phi, c).
    """
    g_ = ws.grid
    q_dual = q / (q - 1.0)
    Vw = ws.wz * float(np.sum(ws.w_r)) * g_.n_z
    w = ws.wcol

    if warm is None:
        phi = ws.stiffness_solve(-grad_adjoint_w(ws, comps))
        c = -inner_w(ws, comps[2], np.ones_like(comps[2])) / Vw
    else:
        phi, c = warm[0].copy(), warm[1]

    def gfield(phi, c):
        out = comps + grad_comps(ws, phi)
        out[2] += c
        return out

    g = gfield(phi, c)
    F = power_integral(ws, g, q)
    it = 0
    dual = np.inf
    converged = False

    for it in range(1, max_iter + 1):
        m2 = mag_sq(g)
        m = (m2 ** ((q - 2.0) / 2.0))[None, :, :] * g
        psi = ws.stiffness_solve(grad_adjoint_w(ws, m))
        cbar = inner_w(ws, m[2], np.ones_like(m[2])) / Vw
        proj = grad_comps(ws, psi)
        proj[2] += cbar
        dual = power_integral(ws, proj, q_dual) ** (1.0 / q_dual)
        scale = max(F ** (1.0 / q_dual), 1e-300)
        if dual <= tol * scale:
            converged = True
            break

        g_phi = q * grad_adjoint_w(ws, m) / w
        g_c = q * inner_w(ws, m[2], np.ones_like(m[2])) / Vw
        a = m2 ** ((q - 2.0) / 2.0)
        floor = max(float(np.quantile(a, 0.02)), 1e-300)
        inv_sa = 1.0 / np.sqrt(a + floor)
        with np.errstate(invalid="ignore", divide="ignore"):
            ghat = np.where(m2 > 0, g / np.sqrt(m2), 0.0)
        c_prec = max(q * (q - 1.0) * float(a.mean()), 1e-300)

        def hess(dphi, dc):
            dg = grad_comps(ws, dphi)
            dg[2] += dc
            gdot = ghat[0] * dg[0] + ghat[1] * dg[1] + ghat[2] * dg[2]
            y = a * (dg + (q - 2.0) * gdot * ghat)
            return q * grad_adjoint_w(ws, y) / w, \
                q * inner_w(ws, y[2], np.ones_like(y[2])) / Vw

        def prec(rphi, rc):
            z = inv_sa * ws.stiffness_solve(w * (inv_sa * rphi)) / q
            return z, rc / c_prec

        def inner2(ap, ac, bp, bc):
            return ws.wz * float(np.sum(ap * bp * w)) + Vw * ac * bc

        dphi = np.zeros_like(phi)
        dc = 0.0
        rphi, rc = -g_phi, -g_c
        zphi, zc = prec(rphi, rc)
        pphi, pc = zphi.copy(), zc
        rz = inner2(rphi, rc, zphi, zc)
        r0 = np.sqrt(inner2(rphi, rc, rphi, rc))
        for _ in range(120):
            hphi, hc = hess(pphi, pc)
            php = inner2(pphi, pc, hphi, hc)
            if php <= 0:
                break
            al = rz / php
            dphi += al * pphi
            dc += al * pc
            rphi -= al * hphi
            rc -= al * hc
            if np.sqrt(inner2(rphi, rc, rphi, rc)) <= 0.02 * r0:
                break
            zphi, zc = prec(rphi, rc)
            rzn = inner2(rphi, rc, zphi, zc)
            beta = rzn / rz
            rz = rzn
            pphi = zphi + beta * pphi
            pc = zc + beta * pc

        slope = inner2(g_phi, g_c, dphi, dc)
        if slope >= 0:
            dphi, dc = prec(-g_phi, -g_c)
            slope = inner2(g_phi, g_c, dphi, dc)
        step_dir = grad_comps(ws, dphi)
        step_dir[2] += dc
        step = 1.0
        for _ in range(60):
            gt = g + step * step_dir
            Ft = power_integral(ws, gt, q)
            if Ft <= F + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        phi = phi + step * dphi
        c = c + step * dc
        g = gt
        F = Ft

    info = {"m_residual": dual, "iterations": it, "converged": converged,
            "objective": F}
    return (phi, c), g, info


# ---------------------------------------------------------------------------
# dealiasing filter


def lowpass_profile(ws: MeridianWorkspace, arr: np.ndarray, parity: int,
                    keep: float = 2.0 / 3.0) -> np.ndarray:
    """Project onto the low 2/3 of parity-matched cosine/sine modes.

    Centered collocated stencils are blind to the top-of-band sawtooth,
    which would otherwise grow freely in the zero-order terms; iterates
    are therefore kept in the dealiased subspace.  Half-sample symmetric
    transforms match the staggered grid: odd radial profiles use the sine
    basis (axis parity built in), even ones the cosine basis; the
    truncated z direction uses the cosine basis.
    """
    import scipy.fft as sfft
    fr = sfft.dst if parity < 0 else sfft.dct
    fr_i = fr
    t = fr(arr, type=2, axis=0, norm="ortho")
    t = sfft.dct(t, type=2, axis=1, norm="ortho")
    n_r, n_z = t.shape
    t[int(keep * n_r):, :] = 0.0
    t[:, int(keep * n_z):] = 0.0
    t = sfft.dct(t, type=3, axis=1, norm="ortho")
    return fr_i(t, type=3, axis=0, norm="ortho")


def lowpass_comps(ws: MeridianWorkspace, comps: np.ndarray,
                  keep: float = 2.0 / 3.0) -> np.ndarray:
    out = np.empty_like(comps)
    for i, par in enumerate(PARITY):
        out[i] = lowpass_profile(ws, comps[i], par, keep)
    return out

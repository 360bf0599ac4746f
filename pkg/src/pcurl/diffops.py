"""Discrete curl, divergence, gradient, Poisson inversion, Helmholtz split.

Spectral mode (the solver default) differentiates the trigonometric
interpolant, so the vector identities div(curl u) = 0 and curl(grad phi)
= 0 hold to roundoff and the Poisson inverse is exact on the grid.  The
fd2/fd4 modes are centered-stencil differences used only for pointwise
checks against analytic fields, where wraparound would contaminate a
boundary layer but interior nodes see the plain stencil.

Zero modes on the torus: constant vector fields are curl-free, so the
Helmholtz split books the mean of a field on the curl-free side together
with the gradient part.  The divergence-free part is therefore mean-free,
which keeps the curl quotients nondegenerate.  The Poisson solve uses the
mean-zero gauge (zero frequency pinned to zero); the input mean is
subtracted before inversion.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .fields import (GridSpec, ScalarField, VectorField3, central_diff)

_WORKERS = int(os.environ.get("PCURL_FFT_WORKERS", "1"))


class SpectralWorkspace:
    """Cached wavenumber tables and transforms for one GridSpec.

    Holds no mutable per-call state, but transforms allocate scratch; use
    one workspace per worker when running concurrently.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n1, n2, n3 = spec.n
        L1, L2, L3 = spec.box
        two_pi = 2.0 * np.pi
        kx = two_pi * sfft.fftfreq(n1, d=L1 / n1)
        ky = two_pi * sfft.fftfreq(n2, d=L2 / n2)
        kz = two_pi * sfft.rfftfreq(n3, d=L3 / n3)
        # zero the unpaired Nyquist bins: a real field's Nyquist cosine has
        # vanishing derivative at the nodes, and keeping ik there would
        # break the exact adjointness of grad and -div on the grid
        if n1 % 2 == 0:
            kx[n1 // 2] = 0.0
        if n2 % 2 == 0:
            ky[n2 // 2] = 0.0
        if n3 % 2 == 0:
            kz[-1] = 0.0
        self.kx = kx.reshape(-1, 1, 1)
        self.ky = ky.reshape(1, -1, 1)
        self.kz = kz.reshape(1, 1, -1)
        self.k2 = self.kx ** 2 + self.ky ** 2 + self.kz ** 2
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv  # multiplier for (-Laplace)^{-1}, zero mode 0
        # modes invisible to every derivative (the mean and, on even
        # grids, the pure-Nyquist corners): discrete-harmonic, assigned
        # to the curl-free side of the splitting
        self.harmonic = ~nz

    # -- transforms -------------------------------------------------------
    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfftn(a, axes=(-3, -2, -1), workers=_WORKERS)

    def ifft(self, A: np.ndarray) -> np.ndarray:
        return sfft.irfftn(A, s=self.spec.n, axes=(-3, -2, -1),
                           workers=_WORKERS)

    # -- spectral operators on raw arrays ---------------------------------
    def grad_arr(self, phi: np.ndarray) -> np.ndarray:
        P = self.fft(phi)
        return np.stack([self.ifft(1j * self.kx * P),
                         self.ifft(1j * self.ky * P),
                         self.ifft(1j * self.kz * P)])

    def div_arr(self, u: np.ndarray) -> np.ndarray:
        U = self.fft(u)
        return self.ifft(1j * (self.kx * U[0] + self.ky * U[1]
                               + self.kz * U[2]))

    def curl_arr(self, u: np.ndarray) -> np.ndarray:
        U = self.fft(u)
        return np.stack([
            self.ifft(1j * (self.ky * U[2] - self.kz * U[1])),
            self.ifft(1j * (self.kz * U[0] - self.kx * U[2])),
            self.ifft(1j * (self.kx * U[1] - self.ky * U[0])),
        ])

    def poisson_arr(self, rho: np.ndarray) -> np.ndarray:
        """phi with Laplace(phi) = rho - mean(rho), mean-zero gauge."""
        R = self.fft(rho)
        return self.ifft(-R * self.inv_k2)

    def inv_neg_laplace_arr(self, a: np.ndarray) -> np.ndarray:
        """(-Laplace)^{-1} with zero mode annihilated; works on (3,...)."""
        A = self.fft(a)
        return self.ifft(A * self.inv_k2)

    def leray_arr(self, u: np.ndarray) -> np.ndarray:
        """Project onto divergence-free fields orthogonal to the kernel."""
        U = self.fft(u)
        kd = self.kx * U[0] + self.ky * U[1] + self.kz * U[2]
        kd *= self.inv_k2
        V = np.stack([U[0] - self.kx * kd, U[1] - self.ky * kd,
                      U[2] - self.kz * kd])
        V[:, self.harmonic] = 0.0
        return self.ifft(V)

    def gradient_part_arr(self, u: np.ndarray) -> np.ndarray:
        """Kernel-side projection: gradients, mean and harmonic junk."""
        U = self.fft(u)
        kd = (self.kx * U[0] + self.ky * U[1] + self.kz * U[2]) * self.inv_k2
        W = np.stack([self.kx * kd, self.ky * kd, self.kz * kd])
        W[:, self.harmonic] = U[:, self.harmonic]
        return self.ifft(W)


_WS_CACHE: dict[tuple, SpectralWorkspace] = {}


def get_workspace(spec: GridSpec) -> SpectralWorkspace:
    key = (spec.n, spec.box)
    ws = _WS_CACHE.get(key)
    if ws is None:
        if len(_WS_CACHE) > 8:
            _WS_CACHE.clear()
        ws = _WS_CACHE[key] = SpectralWorkspace(spec)
    return ws


# ---------------------------------------------------------------------------
# public field-level operations


def _fd_diff(a: np.ndarray, axis: int, spec: GridSpec, order: int):
    return central_diff(a, axis, spec.h[axis], order)


def curl(u: VectorField3, mode: str = "spectral") -> VectorField3:
    spec = u.spec
    if mode == "spectral":
        return VectorField3(spec, get_workspace(spec).curl_arr(u.data))
    order = {"fd2": 2, "fd4": 4}[mode]
    d = u.data
    c1 = _fd_diff(d[2], 1, spec, order) - _fd_diff(d[1], 2, spec, order)
    c2 = _fd_diff(d[0], 2, spec, order) - _fd_diff(d[2], 0, spec, order)
    c3 = _fd_diff(d[1], 0, spec, order) - _fd_diff(d[0], 1, spec, order)
    return VectorField3(spec, np.stack([c1, c2, c3]))


def div(u: VectorField3, mode: str = "spectral") -> ScalarField:
    spec = u.spec
    if mode == "spectral":
        return ScalarField(spec, get_workspace(spec).div_arr(u.data))
    order = {"fd2": 2, "fd4": 4}[mode]
    out = sum(_fd_diff(u.data[i], i, spec, order) for i in range(3))
    return ScalarField(spec, out)


def grad(phi: ScalarField, mode: str = "spectral") -> VectorField3:
    spec = phi.spec
    if mode == "spectral":
        return VectorField3(spec, get_workspace(spec).grad_arr(phi.data))
    order = {"fd2": 2, "fd4": 4}[mode]
    out = np.stack([_fd_diff(phi.data, i, spec, order) for i in range(3)])
    return VectorField3(spec, out)


def poisson_solve(rho: ScalarField) -> ScalarField:
    """Solve Laplace(phi) = rho on the torus, mean-zero gauge.

    A nonzero mean of rho is unsolvable on the torus and is subtracted
    before inversion.
    """
    ws = get_workspace(rho.spec)
    return ScalarField(rho.spec, ws.poisson_arr(rho.data))


@dataclass(frozen=True)
class HelmholtzSplit:
    """Pair v + w = u with div v = 0 (mean-free) and curl w = 0."""

    v: VectorField3
    w: VectorField3


def helmholtz_split(u: VectorField3) -> HelmholtzSplit:
    """Linear Helmholtz decomposition u = v + w on the torus.

    w collects the gradient part grad(Laplace^{-1} div u) and the mean of
    u (constants are curl-free); v is the mean-free divergence-free rest.
    curl w = 0 holds exactly by construction.
    """
    ws = get_workspace(u.spec)
    wpart = ws.gradient_part_arr(u.data)
    return HelmholtzSplit(VectorField3(u.spec, u.data - wpart),
                          VectorField3(u.spec, wpart))

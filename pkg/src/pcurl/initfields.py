"""Seeded initial fields for the minimizers and the CLI."""

from __future__ import annotations

import numpy as np

from .diffops import get_workspace
from .fields import GridSpec, VectorField3


def random_band_limited(spec: GridSpec, seed: int = 0, kmax: int = 4
                        ) -> VectorField3:
    """Smooth periodic field: white noise truncated to |k| <= kmax modes."""
    ws = get_workspace(spec)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3,) + spec.n)
    A = ws.fft(a)
    kcut = kmax * 2.0 * np.pi / max(spec.box)
    A *= ws.k2 <= kcut * kcut
    data = ws.ifft(A)
    return VectorField3(spec, data / max(np.abs(data).max(), 1e-300))


def random_solenoidal_bump(spec: GridSpec, seed: int = 0, kmax: int = 4,
                           width: float | None = None) -> VectorField3:
    """Localized divergence-free field: enveloped noise, kernel projected."""
    ws = get_workspace(spec)
    base = random_band_limited(spec, seed=seed, kmax=kmax)
    X1, X2, X3 = spec.mesh()
    w = width if width is not None else min(spec.box) / 6.0
    env = np.exp(-(X1 ** 2 + X2 ** 2 + X3 ** 2) / (2.0 * w * w))
    data = ws.leray_arr(base.data * env)
    return VectorField3(spec, data / max(np.abs(data).max(), 1e-300))

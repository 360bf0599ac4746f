"""Sampled scalar/vector fields on a uniform periodic box.

The computational domain is the box ``[-L_i/2, L_i/2)`` per axis,
discretized by ``n_i`` evenly spaced nodes ``x = -L_i/2 + j*h_i`` and
treated as a torus.  Origin-centered node placement keeps point
reflections and quarter turns about the x3-axis node-exact, which the
symmetry projectors rely on.  All integrals are plain Riemann sums; on a
periodic grid these coincide with the trapezoidal rule and are spectrally
accurate for smooth data.

Array layout: scalar data has shape ``(n1, n2, n3)`` indexed ``[ix, iy,
iz]``; vector data stacks three such layers into ``(3, n1, n2, n3)``.
The on-disk layout (x-fastest) is handled by :mod:`pcurl.fieldfile`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class KernelFieldError(ValueError):
    """Raised when an operation is undefined on curl-free fields."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform origin-centered periodic grid."""

    n: tuple[int, int, int]
    box: tuple[float, float, float]
    periodic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))
        if len(self.n) != 3 or len(self.box) != 3:
            raise ValueError("GridSpec needs three dims and three lengths")
        if any(v < 4 for v in self.n):
            raise ValueError(f"need at least 4 nodes per axis, got {self.n}")
        if any(L <= 0 for L in self.box):
            raise ValueError(f"box lengths must be positive, got {self.box}")

    @classmethod
    def cube(cls, n: int, L: float) -> "GridSpec":
        return cls((n, n, n), (L, L, L))

    @property
    def h(self) -> tuple[float, float, float]:
        return tuple(L / m for L, m in zip(self.box, self.n))

    @property
    def cell_volume(self) -> float:
        h1, h2, h3 = self.h
        return h1 * h2 * h3

    @property
    def volume(self) -> float:
        return self.box[0] * self.box[1] * self.box[2]

    @property
    def num_nodes(self) -> int:
        return self.n[0] * self.n[1] * self.n[2]

    def axis(self, i: int) -> np.ndarray:
        """Node coordinates along axis i, in [-L_i/2, L_i/2)."""
        L, m = self.box[i], self.n[i]
        return -L / 2.0 + (L / m) * np.arange(m)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays (sparse meshgrid)."""
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2),
                           indexing="ij", sparse=True)

    def scaled(self, factor: float) -> "GridSpec":
        """Grid with every box length multiplied by ``factor``."""
        return GridSpec(self.n, tuple(L * factor for L in self.box),
                        self.periodic)


def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        bad = int(np.size(data) - np.count_nonzero(np.isfinite(data)))
        raise ValueError(f"{what} contains {bad} non-finite samples")


@dataclass(frozen=True)
class ScalarField:
    spec: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != self.spec.n:
            raise ValueError(f"data shape {data.shape} != grid {self.spec.n}")
        _check_finite(data, "ScalarField")
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class VectorField3:
    spec: GridSpec
    data: np.ndarray = field(repr=False)  # shape (3, n1, n2, n3)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (3,) + self.spec.n:
            raise ValueError(f"data shape {data.shape} != (3,)+{self.spec.n}")
        _check_finite(data, "VectorField3")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_components(cls, c1: ScalarField, c2: ScalarField,
                        c3: ScalarField) -> "VectorField3":
        if not (c1.spec == c2.spec == c3.spec):
            raise ValueError("components must share one GridSpec")
        return cls(c1.spec, np.stack([c1.data, c2.data, c3.data]))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.spec, self.data[i])

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorField3":
        return cls(spec, np.zeros((3,) + spec.n))


@dataclass(frozen=True)
class Exponents:
    """Sobolev exponent pair: p in (1,3) and the critical p* = 3p/(3-p).

    p* is always recomputed from p, never stored independently.
    """

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (1.0 < p < 3.0):
            raise ValueError(f"p must lie in (1,3), got {p}")
        object.__setattr__(self, "p", p)

    @property
    def p_star(self) -> float:
        return 3.0 * self.p / (3.0 - self.p)

    @property
    def p_star_conj(self) -> float:
        """Hoelder conjugate of p*, used for dual residual norms."""
        q = self.p_star
        return q / (q - 1.0)


# ---------------------------------------------------------------------------
# norms and integrals


def mag_pow_integral(data: np.ndarray, q: float, cell_volume: float) -> float:
    """Riemann sum of |f|^q for stacked component data (3, ...)."""
    return cell_volume * kernels.mag_pow_sum(data[0], data[1], data[2], q)


def lp_norm(f, q: float) -> float:
    """L^q norm of a field as a Riemann sum over the box.

    Accepts a VectorField3 (pointwise Euclidean magnitude) or a
    ScalarField.  Zero only for the zero field.
    """
    if not np.isfinite(q) or q < 1.0:
        raise ValueError(f"q must be finite and >= 1, got {q}")
    vol = f.spec.cell_volume
    if isinstance(f, VectorField3):
        total = mag_pow_integral(f.data, q, vol)
    elif isinstance(f, ScalarField):
        total = vol * kernels.abs_pow_sum(f.data, q)
    else:
        raise TypeError(f"unsupported field type {type(f)!r}")
    return total ** (1.0 / q)


def abs_field(v: VectorField3) -> ScalarField:
    """Pointwise magnitude |v|."""
    return ScalarField(v.spec, np.sqrt(np.einsum("cijk,cijk->ijk",
                                                 v.data, v.data)))


# ---------------------------------------------------------------------------
# centered difference primitives (shared with diffops)

_FD_COEFFS = {
    2: ((1,), (0.5,)),
    4: ((1, 2), (2.0 / 3.0, -1.0 / 12.0)),
}


def central_diff(arr: np.ndarray, axis: int, h: float, order: int = 2
                 ) -> np.ndarray:
    """Periodic centered difference along one axis (order 2 or 4)."""
    offsets, coeffs = _FD_COEFFS[order]
    out = np.zeros_like(arr)
    for k, c in zip(offsets, coeffs):
        out += c * (np.roll(arr, -k, axis=axis) - np.roll(arr, k, axis=axis))
    return out / h


def fd_interior(order: int) -> int:
    """Boundary layers polluted by wraparound for an fd stencil."""
    return {2: 1, 4: 2}[order]


def grad_abs_check(v: VectorField3, order: int = 2) -> float:
    """Max interior defect of |grad |v|| - |grad v| with matched stencils.

    Both sides use the same centered stencil, so the triangle inequality
    makes the defect nonpositive up to roundoff; the returned value
    certifies the pointwise diamagnetic-type bound on the grid.
    """
    h = v.spec.h
    m = abs_field(v).data
    grad_m_sq = np.zeros_like(m)
    grad_v_sq = np.zeros_like(m)
    for ax in range(3):
        grad_m_sq += central_diff(m, ax, h[ax], order) ** 2
        for c in range(3):
            grad_v_sq += central_diff(v.data[c], ax, h[ax], order) ** 2
    defect = np.sqrt(grad_m_sq) - np.sqrt(grad_v_sq)
    w = fd_interior(order)
    return float(np.max(defect[w:-w, w:-w, w:-w]))


# ---------------------------------------------------------------------------
# dilation / translation


def dilate_translate(u: VectorField3, s: float, y, e: Exponents
                     ) -> tuple[VectorField3, bool]:
    """Apply the L^{p*}-invariant dilation u -> s^{3/p*} u(s . + y).

    The output lives on the grid with box lengths L_i/s (the lattice
    dilates with the field), under which both invariants
    |T u|_{p*} = |u|_{p*} and |curl T u|_p = |curl u|_p hold exactly:
    the samples are a translated copy of the input scaled by s^{3/p*}.
    When y is a lattice vector the translation is an index roll (exact);
    otherwise the samples are trilinear interpolations of the periodic
    extension and the second return value flags it.
    """
    if s <= 0:
        raise ValueError(f"dilation factor must be positive, got {s}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (3,):
        raise ValueError("offset y must be a 3-vector")
    spec = u.spec
    h = spec.h
    shifts = [y[i] / h[i] for i in range(3)]
    amp = s ** (3.0 / e.p_star)
    out_spec = spec.scaled(1.0 / s)
    if all(abs(sh - round(sh)) < 1e-9 for sh in shifts):
        k = [int(round(sh)) for sh in shifts]
        data = amp * np.roll(u.data, shift=(-k[0], -k[1], -k[2]),
                             axis=(1, 2, 3))
        return VectorField3(out_spec, data), False
    from scipy.ndimage import map_coordinates
    idx = np.meshgrid(*(np.arange(m, dtype=np.float64) + sh
                        for m, sh in zip(spec.n, shifts)), indexing="ij")
    coords = np.stack([ix.ravel() for ix in idx])
    data = np.empty_like(u.data)
    for c in range(3):
        data[c] = amp * map_coordinates(u.data[c], coords, order=1,
                                        mode="grid-wrap").reshape(spec.n)
    return VectorField3(out_spec, data), True

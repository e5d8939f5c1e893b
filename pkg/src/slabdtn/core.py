"""Shared parameter, grid and field types for the slab operator toolkit.

The computational domain is a periodic horizontal box of period ``L`` per
axis (standing in for R^n) times the vertical interval [0, 1], carrying the
degenerate weight y^a with a in (-1, 1).  Everything downstream (symbol
evaluation, extension solves, energy minimization) consumes the types and
the weighted-mesh coefficient helpers defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DegenerateWeightError(ValueError):
    """Raised when y^a is evaluated at y=0 with a < 0 (divergent weight)."""


class IterationLimitError(RuntimeError):
    """Raised when an iterative solve hits its iteration cap."""


def default_gamma(a: float) -> float:
    """Default vertical grading exponent for the weight exponent ``a``.

    The graded mesh must resolve the singular solution component y^(1-a)
    near the surface; equidistributing its variation gives the exponent
    1/(1-a).  A floor of 2 keeps high-frequency boundary layers resolved
    for every ``a``, and a cap of 4 keeps the bottom cells inside the range
    where the flux coefficients are well conditioned in float64.
    """
    return min(4.0, max(2.0, 1.0 / (1.0 - a)))


def make_graded_mesh(My: int, gamma: float) -> np.ndarray:
    """Vertical nodes y_j = (j/(My-1))^gamma, j = 0..My-1.

    Doubling My-1 at fixed gamma reproduces the coarse nodes exactly
    (index-doubling subset), which the Richardson extrapolations rely on.
    """
    if My < 3:
        raise ValueError(f"My must be >= 3, got {My}")
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    j = np.arange(My, dtype=float)
    y = (j / (My - 1.0)) ** gamma
    y[0] = 0.0
    y[-1] = 1.0
    return y


def weight(y: float, a: float) -> float:
    """The degenerate density y^a.

    At y=0 the weight is 0 for a > 0 and 1 for a = 0; for a < 0 it diverges
    and evaluation is an error: callers must use half-node flux coefficients
    (see :func:`flux_coefficients`) instead of sampling the weight there.
    """
    if not -1.0 < a < 1.0:
        raise ValueError(f"weight exponent must lie in (-1, 1), got {a}")
    if y < 0.0 or y > 1.0:
        raise ValueError(f"y must lie in [0, 1], got {y}")
    if y == 0.0:
        if a > 0.0:
            return 0.0
        if a == 0.0:
            return 1.0
        raise DegenerateWeightError("y^a diverges at y=0 for a < 0")
    return y ** a


@dataclass(frozen=True)
class FractionalParams:
    """The pair (a, s) with a in (-1,1) and s = (1-a)/2.

    Single source of truth for the weight exponent: construct with
    :meth:`from_a` or :meth:`from_s` so the relation never drifts.
    """

    a: float
    s: float

    def __post_init__(self):
        if not -1.0 < self.a < 1.0:
            raise ValueError(f"a must lie strictly in (-1, 1), got {self.a}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie strictly in (0, 1), got {self.s}")
        if abs(self.s - 0.5 * (1.0 - self.a)) > 1e-14:
            raise ValueError(f"inconsistent pair: s={self.s} but (1-a)/2={(1.0-self.a)/2.0}")

    @classmethod
    def from_a(cls, a: float) -> "FractionalParams":
        return cls(a=a, s=0.5 * (1.0 - a))

    @classmethod
    def from_s(cls, s: float) -> "FractionalParams":
        return cls(a=1.0 - 2.0 * s, s=s)


@dataclass(frozen=True)
class SlabGrid:
    """Discretization of the periodic box [-L/2, L/2)^n times [0, 1].

    Horizontal nodes are uniform (x_i = -L/2 + i L/Nx per axis, Nx even so
    real-signal Fourier symmetry holds); vertical nodes follow the graded
    mesh (j/(My-1))^gamma concentrating resolution at the degenerate
    surface y=0.
    """

    n: int
    L: float
    Nx: int
    My: int
    gamma: float
    y_nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"horizontal dimension must be 1 or 2, got {self.n}")
        if self.Nx < 4 or self.Nx % 2 != 0:
            raise ValueError(f"Nx must be even and >= 4, got {self.Nx}")
        if self.My < 3:
            raise ValueError(f"My must be >= 3, got {self.My}")
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.L <= 0.0:
            raise ValueError(f"L must be positive, got {self.L}")
        y = np.asarray(self.y_nodes, dtype=float)
        if y.shape != (self.My,) or y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0.0):
            raise ValueError("y_nodes must be strictly increasing from exactly 0 to exactly 1")
        y.flags.writeable = False
        object.__setattr__(self, "y_nodes", y)

    @classmethod
    def make(cls, n: int, L: float, Nx: int, My: int, gamma: float | None = None,
             a: float = 0.0) -> "SlabGrid":
        """Build a grid; gamma defaults to :func:`default_gamma` of ``a``."""
        g = default_gamma(a) if gamma is None else float(gamma)
        return cls(n=n, L=L, Nx=Nx, My=My, gamma=g, y_nodes=make_graded_mesh(My, g))

    @property
    def hx(self) -> float:
        return self.L / self.Nx

    def x_nodes(self) -> np.ndarray:
        return -0.5 * self.L + self.hx * np.arange(self.Nx)

    def x_shape(self) -> tuple:
        return (self.Nx,) * self.n

    def wavenumbers_1d(self) -> np.ndarray:
        """Signed wavenumbers 2*pi*m/L in FFT ordering."""
        return 2.0 * math.pi * np.fft.fftfreq(self.Nx, d=self.hx)


def _check_values(values, shape) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != shape:
        raise ValueError(f"values shape {v.shape} != expected {shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    v = v.copy()
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class TraceField:
    """Real samples of a surface datum u on the horizontal grid (y=0)."""

    grid: SlabGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, self.grid.x_shape()))


@dataclass(frozen=True)
class SlabField:
    """Real samples of a field v on the full slab grid, axis -1 vertical."""

    grid: SlabGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = self.grid.x_shape() + (self.grid.My,)
        object.__setattr__(self, "values", _check_values(self.values, shape))

    def trace(self) -> TraceField:
        return TraceField(self.grid, self.values[..., 0])


def flux_coefficients(y_nodes: np.ndarray, a: float) -> np.ndarray:
    """Effective weight w_bar for each vertical cell [y_j, y_{j+1}].

    w_bar is the harmonic-integral average
        w_bar_j = h_j / int_{y_j}^{y_{j+1}} y^(-a) dy
                = h_j (1-a) / (y_{j+1}^(1-a) - y_j^(1-a)),
    which reproduces the exact flux of any constant-flux profile across the
    cell; the singular solution component y^(1-a) at the surface is exactly
    of that type, so the bottom cell carries no leading-order error.  The
    weight itself is never evaluated at y=0 (well defined for all a in
    (-1,1)).  For a=0 this reduces to w_bar = 1.
    """
    y = np.asarray(y_nodes, dtype=float)
    h = np.diff(y)
    p = 1.0 - a
    return h * p / (y[1:] ** p - y[:-1] ** p)


def cell_masses(y_nodes: np.ndarray, a: float) -> np.ndarray:
    """Exact integrals of y^a over the control volume of each node.

    Control volumes are [c_{j-1}, c_j] with c_j the midpoints between
    nodes, closed by c_{-1}=0 and c_{My-1}=1.
    """
    y = np.asarray(y_nodes, dtype=float)
    c = 0.5 * (y[1:] + y[:-1])
    edges = np.concatenate(([0.0], c, [1.0]))
    q = 1.0 + a
    return (edges[1:] ** q - edges[:-1] ** q) / q

"""Finite-difference solver for the half-line fiber operator.

    h(k) = -d^2/dx^2 + (b x - k)^2   on (0, inf)

with a Dirichlet or Neumann condition at x = 0.  Eigenvalues are computed on
three nested grids and combined by Richardson extrapolation in the squared
step; the difference between the last two extrapolants serves as the
discretization error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    NumericalError,
    TriDiag,
    hermite_phi,
    inverse_iteration,
    tridiag_eig_index,
)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class FiberSpec:
    """Physical and discretization parameters of the fiber family.

    Parameters
    ----------
    b : float
        Magnetic field strength.
    bc : str
        ``"dirichlet"`` or ``"neumann"`` at x = 0.
    n_x : int
        Interior grid points on the coarsest Richardson level.
    pad : float
        Domain margin beyond the classical centre ``k/b``, in units of
        ``b**-0.5``.
    richardson : int
        Number of grid levels (1, 2 or 3).
    """

    b: float = 1.0
    bc: str = DIRICHLET
    n_x: int = 400
    pad: float = 12.0
    richardson: int = 3

    def __post_init__(self):
        bc = str(self.bc).lower()
        if bc not in (DIRICHLET, NEUMANN):
            raise ValueError(f"bc must be 'dirichlet' or 'neumann', got {self.bc!r}")
        object.__setattr__(self, "bc", bc)
        if not (np.isfinite(self.b) and self.b > 0):
            raise ValueError("b must be positive")
        if int(self.n_x) != self.n_x or self.n_x < 200:
            raise ValueError("n_x must be an integer >= 200")
        if not self.pad >= 8:
            raise ValueError("pad must be >= 8")
        if self.richardson not in (1, 2, 3):
            raise ValueError("richardson must be 1, 2 or 3")

    @property
    def landau(self):
        return lambda j: self.b * (2 * j - 1)

    def domain_length(self, k: float) -> float:
        return max(k, 0.0) / self.b + self.pad / np.sqrt(self.b)


@dataclass(frozen=True)
class Mode:
    j: int
    k: float
    energy: float
    x_grid: np.ndarray
    values: np.ndarray
    disc_error: float

    @property
    def step(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    def norm(self) -> float:
        return float(np.sqrt(self.step * np.sum(self.values**2)))


# ---------------------------------------------------------------------------
# grids and matrices


def _grid(bc: str, L: float, n: int) -> tuple[np.ndarray, float]:
    if bc == DIRICHLET:
        h = L / (n + 1)
        return h * np.arange(1, n + 1), h
    h = L / (n + 0.5)
    return h * (np.arange(1, n + 1) - 0.5), h


def _refine(bc: str, n: int) -> int:
    # the step is halved exactly; for the staggered grid the right end moves
    # in by a quarter step, well inside the Gaussian tail
    return 2 * n + 1 if bc == DIRICHLET else 2 * n


def _matrix(b: float, bc: str, k: float, x: np.ndarray, h: float) -> TriDiag:
    q = (b * x - k) ** 2
    diag = 2.0 / h**2 + q
    if bc == NEUMANN:
        diag[0] = 1.0 / h**2 + q[0]
    return TriDiag(diag, np.full(x.size - 1, -1.0 / h**2))


def assemble_fiber_matrix(spec: FiberSpec, k: float, n: int | None = None, L: float | None = None):
    """Second-order finite-difference matrix of h(k) and its grid.

    Dirichlet uses the vertex grid ``x_i = i*h`` and Neumann the staggered
    grid ``x_i = (i - 1/2)*h`` with a reflected ghost cell; both truncate
    with a homogeneous Dirichlet value at ``x = L``.
    """
    n = spec.n_x if n is None else int(n)
    L = spec.domain_length(k) if L is None else float(L)
    x, h = _grid(spec.bc, L, n)
    return _matrix(spec.b, spec.bc, float(k), x, h), x


def _eigvec(T: TriDiag, mu: float) -> np.ndarray:
    v = inverse_iteration(T, mu)
    return _fix_sign(v)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # first lobe positive: the first entry of appreciable size decides
    big = np.flatnonzero(np.abs(v) > 1e-3 * np.max(np.abs(v)))
    return -v if v[big[0]] < 0 else v


def _hf_derivative(spec: FiberSpec, k: float, x: np.ndarray, v: np.ndarray) -> float:
    # Hellmann-Feynman on the discrete problem: exact derivative of the grid eigenvalue
    return float(-2.0 * np.dot(spec.b * x - k, v * v) / np.dot(v, v))


def _rayleigh(spec: FiberSpec, k: float, x: np.ndarray, h: float, v: np.ndarray) -> float:
    # quadratic form written as a sum of squares, so no cancellation against
    # the O(1/h^2) diagonal; accurate to a few ulps of E itself
    d = np.diff(v)
    kin = np.dot(d, d) + v[-1] ** 2
    if spec.bc == DIRICHLET:
        kin += v[0] ** 2
    num = kin / h**2 + np.dot((spec.b * x - k) ** 2, v * v)
    return float(num / np.dot(v, v))


def _levels(spec: FiberSpec, j: int, k: float):
    L = spec.domain_length(k)
    n = spec.n_x
    energies, derivs, last = [], [], None
    levels = max(spec.richardson, 2)  # one coarser solve gives the error estimate
    for _ in range(levels):
        T, x = assemble_fiber_matrix(spec, k, n=n, L=L)
        h = x[1] - x[0]
        v = _eigvec(T, tridiag_eig_index(T, j, rtol=1e-11, atol=1e-11))
        energies.append(_rayleigh(spec, k, x, h, v))
        derivs.append(_hf_derivative(spec, k, x, v))
        last = (T, x, v)
        n = _refine(spec.bc, n)
        if spec.bc == NEUMANN:
            L = L - 0.25 * h
    return np.array(energies), np.array(derivs), last


def _extrapolate(vals: np.ndarray, levels: int) -> tuple[float, float]:
    if levels == 1:
        # no extrapolation: the fine value, with the coarse/fine difference
        # as its error estimate
        return float(vals[1]), float(abs(vals[1] - vals[0]) / 3.0)
    r1 = (4.0 * vals[1:] - vals[:-1]) / 3.0
    if levels == 2:
        return float(r1[0]), float(abs(r1[0] - vals[1]))
    r2 = (16.0 * r1[1] - r1[0]) / 15.0
    return float(r2), float(abs(r2 - r1[1]))


def _solve(spec: FiberSpec, j: int, k: float):
    if int(j) != j or j < 1:
        raise ValueError("j must be a positive integer")
    if not np.isfinite(k):
        raise ValueError("k must be finite")
    vals, derivs, last = _levels(spec, int(j), float(k))
    E, err = _extrapolate(vals, spec.richardson)
    return E, err, vals, derivs, last


def band_value(spec: FiberSpec, j: int, k: float) -> tuple[float, float]:
    """E_j(k) with its estimated discretization error."""
    E, err, *_ = _solve(spec, j, k)
    return E, err


def band_levels(spec: FiberSpec, j: int, k: float) -> np.ndarray:
    """Raw eigenvalues on each Richardson level (coarse to fine)."""
    return _solve(spec, j, k)[2]


def fiber_mode(spec: FiberSpec, j: int, k: float) -> Mode:
    """Normalized eigenfunction on the finest grid, first lobe positive."""
    E, err, _, _, (T, x, v) = _solve(spec, j, k)
    h = x[1] - x[0]
    vals = v / np.sqrt(h * np.dot(v, v))
    return Mode(int(j), float(k), E, x, vals, err)


def band_derivative(spec: FiberSpec, j: int, k: float) -> float:
    """E_j'(k) from the Hellmann-Feynman formula, extrapolated across grids."""
    _, _, _, derivs, _ = _solve(spec, j, k)
    return _extrapolate(derivs, spec.richardson)[0]


def band_value_and_derivative(spec: FiberSpec, j: int, k: float) -> tuple[float, float, float]:
    """``(E, dE, disc_error)`` from one set of grid solves."""
    E, err, _, derivs, _ = _solve(spec, j, k)
    dE = _extrapolate(derivs, spec.richardson)[0]
    return E, dE, err


def mode_residual(spec: FiberSpec, mode: Mode, energy: float | None = None) -> float:
    """Discrete L2 norm of ``h(k) psi - E psi`` on the mode grid.

    By default E is the Rayleigh quotient of ``psi`` on its own grid.  The
    extrapolated ``mode.energy`` is not an eigenvalue of any single grid
    matrix; passing it measures the finest grid's discretization error
    instead.
    """
    h = mode.step
    T = _matrix(spec.b, spec.bc, mode.k, mode.x_grid, h)
    Tv = T.matvec(mode.values)
    E = float(np.dot(mode.values, Tv) / np.dot(mode.values, mode.values)) if energy is None else energy
    r = Tv - E * mode.values
    return float(np.sqrt(h * np.dot(r, r)))


def limit_mode(j: int, k: float, b: float, x):
    """Full-line oscillator mode ``b**(1/4) phi_j(sqrt(b) x - k/sqrt(b))``."""
    if b <= 0:
        raise ValueError("b must be positive")
    sb = np.sqrt(b)
    return b**0.25 * hermite_phi(j, sb * np.asarray(x, dtype=float) - k / sb)


# ---------------------------------------------------------------------------
# modes on a shared grid


@dataclass(frozen=True)
class MasterGrid:
    """One x-grid on which modes at many k are solved, so they can be multiplied pointwise."""

    spec: FiberSpec
    x: np.ndarray
    step: float
    k_cover: float

    @classmethod
    def covering(cls, spec: FiberSpec, k_max: float, step: float = 0.025) -> "MasterGrid":
        L = spec.domain_length(k_max)
        n = int(np.ceil(L / step))
        x, h = _grid(spec.bc, L, n)
        return cls(spec, x, h, float(k_max))

    def weights(self) -> np.ndarray:
        return np.full(self.x.size, self.step)


def modes_on_grid(grid: MasterGrid, j: int, ks) -> tuple[np.ndarray, np.ndarray]:
    """Normalized modes ``psi_j(.; k)`` for every k on a common grid.

    Returns ``(energies, modes)`` with ``modes[q]`` sampled on ``grid.x``.
    Energies here are single-grid values; callers needing accurate band
    values use :func:`band_value`.
    """
    ks = np.asarray(ks, dtype=float)
    spec = grid.spec
    out = np.empty((ks.size, grid.x.size))
    energies = np.empty(ks.size)
    for i, k in enumerate(ks):
        if k > grid.k_cover + 1e-9:
            raise NumericalError(f"k={k} lies beyond the master grid coverage {grid.k_cover}")
        T = _matrix(spec.b, spec.bc, k, grid.x, grid.step)
        e = tridiag_eig_index(T, j)
        v = _eigvec(T, e)
        out[i] = v / np.sqrt(grid.step * np.dot(v, v))
        energies[i] = e
    return energies, out

"""Band tables, their inverses, and asymptotic diagnostics near the Landau levels."""

from __future__ import annotations

import functools
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import erfc

from .fiber import (
    DIRICHLET,
    NEUMANN,
    FiberSpec,
    MasterGrid,
    band_value,
    band_value_and_derivative,
    fiber_mode,
    limit_mode,
    modes_on_grid,
)
from .numerics import NumericalError, brent_root, composite_gauss_legendre, hermite_phi

# gap-sensitive diagnostics require gap >= TRUST_FACTOR * disc_error
TRUST_FACTOR = 1e3


@dataclass(frozen=True)
class BandTable:
    """Tabulated band ``E_j`` with Hellmann-Feynman derivatives.

    ``report`` records the monotonicity audit: how many neighbouring pairs
    were resolvable above the discretization error and how many of those
    were checked.
    """

    spec: FiberSpec
    j: int
    k_nodes: np.ndarray
    energies: np.ndarray
    derivatives: np.ndarray
    disc_errors: np.ndarray
    report: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.k_nodes.size
        if n < 2 or any(a.size != n for a in (self.energies, self.derivatives, self.disc_errors)):
            raise ValueError("table arrays must share a length >= 2")
        if np.any(np.diff(self.k_nodes) <= 0):
            raise ValueError("k_nodes must be strictly increasing")

    @property
    def threshold(self) -> float:
        return self.spec.b * (2 * self.j - 1)

    @property
    def gaps(self) -> np.ndarray:
        return self.energies - self.threshold

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,E,dE,disc_error\n")
        for row in zip(self.k_nodes, self.energies, self.derivatives, self.disc_errors):
            buf.write(",".join(format_float(v) for v in row) + "\n")
        return buf.getvalue()


def format_float(v: float) -> str:
    """17 significant digits, scientific notation."""
    return f"{float(v):.16e}"


def chebyshev_nodes(a: float, b: float, n: int) -> np.ndarray:
    """Chebyshev extreme points on ``[a, b]`` in increasing order."""
    t = np.cos(np.pi * np.arange(n - 1, -1, -1) / (n - 1))
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    x[0], x[-1] = a, b
    return x


def tabulate_band(spec: FiberSpec, j: int, k_min: float, k_max: float, n_nodes: int, nodes=None) -> BandTable:
    """Solve the band at ``n_nodes`` Chebyshev points of ``[k_min, k_max]``.

    For Dirichlet the table must be strictly decreasing wherever neighbouring
    values differ by more than their combined discretization error; a
    resolvable increase raises :class:`NumericalError`.  Pairs whose
    difference is below resolution are counted in ``report`` but not judged.
    """
    if not k_min < k_max:
        raise ValueError("need k_min < k_max")
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    ks = chebyshev_nodes(k_min, k_max, n_nodes) if nodes is None else np.asarray(nodes, dtype=float)
    sol = np.array([band_value_and_derivative(spec, j, k) for k in ks])
    E, dE, err = sol[:, 0], sol[:, 1], sol[:, 2]
    dEk = np.diff(E)
    tol = err[:-1] + err[1:]
    resolvable = np.abs(dEk) > tol
    report = {"pairs": int(dEk.size), "resolvable": int(resolvable.sum())}
    if spec.bc == DIRICHLET:
        bad = np.flatnonzero(resolvable & (dEk > 0))
        report["violations"] = int(bad.size)
        if bad.size:
            i = bad[0]
            raise NumericalError(
                f"band {j} increases between k={ks[i]:.6g} and k={ks[i + 1]:.6g} "
                f"by {dEk[i]:.3e} (> {tol[i]:.3e})",
                residual=float(dEk[i]),
            )
    report["unresolved_from_k"] = float(ks[np.flatnonzero(~resolvable)[0]]) if (~resolvable).any() else None
    return BandTable(spec, int(j), ks, E, dE, err, report)


# ---------------------------------------------------------------------------
# the trustworthy window


@functools.lru_cache(maxsize=64)
def trust_window(spec: FiberSpec, j: int, step: float = 0.05) -> tuple[float, float]:
    """Interval of k >= 0 on which ``|E_j(k) - E_threshold| >= TRUST_FACTOR * disc_error``.

    The upper end is located by a coarse scan followed by bisection.  For
    Neumann the lower end skips the region around k=0 where the band
    crosses the Landau level.
    """
    thr = spec.b * (2 * j - 1)

    def ok(k):
        E, err = band_value(spec, j, k)
        return abs(E - thr) >= TRUST_FACTOR * err

    lo = 0.0
    if spec.bc == NEUMANN:
        lo = step
        while not ok(lo):
            lo += step
    k = max(lo, np.sqrt(spec.b))
    while ok(k + 0.5 * np.sqrt(spec.b)):
        k += 0.5 * np.sqrt(spec.b)
    a, c = k, k + 0.5 * np.sqrt(spec.b)
    while c - a > 1e-3:
        mid = 0.5 * (a + c)
        if ok(mid):
            a = mid
        else:
            c = mid
    return float(lo), float(a)


def _check_window(spec: FiberSpec, j: int, k: float):
    lo, hi = trust_window(spec, j)
    E, err = band_value(spec, j, k)
    gap = E - spec.b * (2 * j - 1)
    if abs(gap) < TRUST_FACTOR * err:
        raise NumericalError(
            f"k={k} is outside the trustworthy window [{lo:.4g}, {hi:.4g}] "
            f"(gap {gap:.3e} vs disc_error {err:.3e})",
            residual=gap,
        )
    return gap, err


# ---------------------------------------------------------------------------
# tail model beyond the window


@dataclass(frozen=True)
class TailModel:
    """Fitted large-k form ``s(k) = sign * A k**(2j-1) exp(-k**2/b) (1 + B/k**2)``.

    Fitted on the upper part of the trustworthy window and used only where
    the band gap sits below the finite-difference resolution.
    """

    j: int
    b: float
    sign: float
    logA: float
    B: float
    k_fit: tuple

    def log_abs_s(self, k):
        k = np.asarray(k, dtype=float)
        return self.logA + (2 * self.j - 1) * np.log(k) - k * k / self.b + np.log1p(self.B / (k * k))

    def s(self, k):
        return self.sign * np.exp(self.log_abs_s(k))

    def ds(self, k):
        k = np.asarray(k, dtype=float)
        dlog = (2 * self.j - 1) / k - 2 * k / self.b - 2 * self.B / (k**3 * (1 + self.B / (k * k)))
        return self.s(k) * dlog

    def k_of_s(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        for i, si in enumerate(s):
            target = np.log(abs(si))
            f = lambda k: float(self.log_abs_s(k)) - target
            lo = self.k_fit[0]
            hi = max(lo + 1.0, np.sqrt(max(-target, 1.0) * self.b) + 2.0)
            while f(hi) > 0:
                hi *= 1.5
            out[i] = brent_root(f, lo, hi, tol=1e-13)
        return out


def fit_tail(spec: FiberSpec, j: int, n_fit: int = 8) -> TailModel:
    lo, hi = trust_window(spec, j)
    ks = np.linspace(max(lo, hi - 1.5 * np.sqrt(spec.b)), hi, n_fit)
    gaps = np.array([band_value(spec, j, k)[0] for k in ks]) - spec.b * (2 * j - 1)
    sign = float(np.sign(gaps[-1]))
    y = np.log(np.abs(gaps)) - (2 * j - 1) * np.log(ks) + ks**2 / spec.b
    # y = log A + log(1 + B/k^2) ~ log A + B/k^2
    c1, c0 = np.polyfit(1.0 / ks**2, y, 1)
    return TailModel(int(j), spec.b, sign, float(c0), float(c1), (float(ks[0]), float(ks[-1])))


# ---------------------------------------------------------------------------
# inverse band


@dataclass(frozen=True)
class InverseBand:
    """Monotone inverse of ``s = E_j(k) - E_threshold`` on one branch.

    ``branch`` is ``"decreasing"`` (every Dirichlet band, and the left
    Neumann branch) or ``"increasing"`` (right Neumann branch beyond the
    minimum).  ``[s_min, s_max]`` is the range covered with full accuracy;
    for Neumann branches ``s`` may be negative.
    """

    table: BandTable
    s_min: float
    s_max: float
    branch: str = "decreasing"
    tail: TailModel | None = None

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ValueError("need s_min < s_max")
        if self.table.spec.bc == DIRICHLET and self.s_min <= 0:
            raise ValueError("s_min must be positive for a Dirichlet band")
        if self.branch not in ("decreasing", "increasing"):
            raise ValueError("branch must be 'decreasing' or 'increasing'")
        t = self.table
        s = t.gaps
        ds = t.derivatives
        k = t.k_nodes
        logmode = bool(np.all(s > 0) or np.all(s < 0))
        if logmode:
            spline = CubicHermiteSpline(k, np.log(np.abs(s)), ds / s)
        else:
            spline = CubicHermiteSpline(k, s, ds)
        object.__setattr__(self, "_logmode", logmode)
        object.__setattr__(self, "_spline", spline)

    @property
    def spec(self) -> FiberSpec:
        return self.table.spec

    @property
    def j(self) -> int:
        return self.table.j

    @property
    def threshold(self) -> float:
        return self.table.threshold

    @property
    def k_range(self) -> tuple[float, float]:
        return float(self.table.k_nodes[0]), float(self.table.k_nodes[-1])

    def s_interp(self, k):
        """Band offset from the table interpolant (tail model beyond the table)."""
        k = np.asarray(k, dtype=float)
        kk = np.clip(k, *self.k_range)
        v = self._spline(kk)
        out = np.sign(self.table.gaps[0]) * np.exp(v) if self._logmode else v
        if self.tail is not None:
            beyond = k > self.k_range[1]
            if np.any(beyond):
                out = np.where(beyond, self.tail.s(np.where(beyond, k, self.tail.k_fit[1])), out)
        return out

    def ds_interp(self, k):
        k = np.asarray(k, dtype=float)
        kk = np.clip(k, *self.k_range)
        d = self._spline(kk, 1)
        out = self.s_interp(kk) * d if self._logmode else d
        if self.tail is not None:
            beyond = k > self.k_range[1]
            if np.any(beyond):
                out = np.where(beyond, self.tail.ds(np.where(beyond, k, self.tail.k_fit[1])), out)
        return out

    def k_guess(self, s: float) -> float:
        """Root of the interpolant (or tail model) for ``s``; no direct solves."""
        k0, k1 = self.k_range
        s_lo_end = float(self.s_interp(k1))
        if self.tail is not None and abs(s) < abs(s_lo_end) and np.sign(s) == np.sign(s_lo_end):
            return float(self.tail.k_of_s(s)[0])
        if self._logmode:
            target = np.log(abs(s))
            f = lambda k: float(self._spline(k)) - target
        else:
            f = lambda k: float(self._spline(k)) - s
        return brent_root(f, k0, k1, tol=1e-14)


def build_inverse_band(
    spec: FiberSpec,
    j: int,
    branch: str = "decreasing",
    k_lo: float | None = None,
    n_nodes: int = 64,
    with_tail: bool = True,
) -> InverseBand:
    """Tabulate one monotone branch of ``E_j`` and wrap its inverse.

    The branch spans from ``k_lo`` (default: where ``s = 2b``, plus margin)
    to the top of the trustworthy window.  Neumann branches are split at
    the band minimum.
    """
    thr = spec.b * (2 * j - 1)
    _, k_hi = trust_window(spec, j)
    if spec.bc == DIRICHLET:
        if k_lo is None:
            k_lo = -1.0 * np.sqrt(spec.b) - np.sqrt(2 * spec.b * j)
        table = tabulate_band(spec, j, k_lo, k_hi, n_nodes)
        return InverseBand(table, float(table.gaps[-1]), float(table.gaps[0]), "decreasing",
                           fit_tail(spec, j) if with_tail else None)
    kmin, Emin = band_minimum(spec, j)
    if branch == "decreasing":
        if k_lo is None:
            k_lo = -1.0 * np.sqrt(spec.b) - np.sqrt(2 * spec.b * j)
        table = tabulate_band(spec, j, k_lo, kmin, n_nodes)
        return InverseBand(table, float(Emin - thr), float(table.gaps[0]), "decreasing", None)
    table = tabulate_band(spec, j, kmin, k_hi, n_nodes)
    return InverseBand(table, float(Emin - thr), float(table.gaps[-1]), "increasing",
                       fit_tail(spec, j) if with_tail else None)


def invert_band(inv: InverseBand, s: float, tol: float = 1e-10) -> float:
    """``rho_j(s)``: the momentum where the band offset equals ``s``.

    The interpolant root is polished by Newton steps on direct band solves
    until ``|E_j(k) - E_threshold - s| <= max(tol, 10 disc_error)`` and the
    step falls below 1e-13.
    """
    if not inv.s_min <= s <= inv.s_max:
        raise NumericalError(f"s={s} outside the covered range [{inv.s_min:.6g}, {inv.s_max:.6g}]")
    spec, j, thr = inv.spec, inv.j, inv.threshold
    k = inv.k_guess(s)
    logmode = inv._logmode and s != 0
    for _ in range(12):
        E, dE, err = band_value_and_derivative(spec, j, k)
        g = E - thr
        if logmode and np.sign(g) == np.sign(s):
            step = (np.log(abs(g)) - np.log(abs(s))) * g / dE
        else:
            step = (g - s) / dE
        k -= step
        if abs(step) < 1e-13 * max(1.0, abs(k)):
            break
    E, err = band_value(spec, j, k)
    resid = abs(E - thr - s)
    if resid > max(tol, 10 * err):
        raise NumericalError(f"inversion at s={s} left residual {resid:.3e}", residual=resid)
    return float(k)


def rho_derivative(inv: InverseBand, s: float) -> float:
    """``rho_j'(s) = 1 / E_j'(rho_j(s))``."""
    k = invert_band(inv, s)
    dE = band_value_and_derivative(inv.spec, inv.j, k)[1]
    if abs(dE) < 1e-300:
        raise NumericalError("inversion singular: band derivative vanishes", residual=dE)
    return 1.0 / dE


# ---------------------------------------------------------------------------
# diagnostics


def gap_asymptotic_ratio(spec: FiberSpec, j: int, k: float) -> float:
    """``(E_j(k) - E_threshold) / (k**(2j-1) exp(-k**2/b))`` inside the trustworthy window."""
    gap, _ = _check_window(spec, j, k)
    return float(gap / (k ** (2 * j - 1) * np.exp(-k * k / spec.b)))


def mode_defect(spec: FiberSpec, j: int, k: float) -> float:
    """L2(R+) distance between the half-line mode and the shifted oscillator mode."""
    if k < 1:
        raise ValueError("mode_defect requires k >= 1")
    return _defect(spec, j, k)


def _defect(spec: FiberSpec, j: int, k: float) -> float:
    m = fiber_mode(spec, j, k)
    lim = limit_mode(j, k, spec.b, m.x_grid)
    if np.dot(lim, m.values) < 0:
        lim = -lim
    d = m.values - lim
    h = m.step
    # the truncated domain carries no limit-mode mass to speak of (pad >= 8)
    return float(np.sqrt(h * np.dot(d, d)))


def projection_distance(spec: FiberSpec, j: int, k: float, k2: float, step: float = 0.01) -> float:
    """Operator-norm distance between the rank-one projections onto ``psi_j(k)`` and ``psi_j(k2)``."""
    grid = MasterGrid.covering(spec, max(k, k2), step=step)
    _, modes = modes_on_grid(grid, j, [k, k2])
    ov = grid.step * float(np.dot(modes[0], modes[1]))
    return float(np.sqrt(max(0.0, 1.0 - ov * ov)))


def neg_mass(j: int, k: float, b: float) -> float:
    """Mass of the limit mode on the negative half-line."""
    if j < 1 or b <= 0:
        raise ValueError("need j >= 1 and b > 0")
    u = -k / np.sqrt(b)  # upper limit in the oscillator variable
    if u > 0:
        return 1.0 - neg_mass(j, -k, b)
    edges = np.linspace(u - 40.0 - 2 * np.sqrt(j), u, 81)
    rule = composite_gauss_legendre(edges, 20)
    return float(np.dot(rule.weights, hermite_phi(j, rule.nodes) ** 2))


def neg_mass_closed_form(k: float, b: float) -> float:
    """``erfc(k/sqrt(b))/2``, the j=1 value."""
    return float(0.5 * erfc(k / np.sqrt(b)))


def band_minimum(spec: FiberSpec, j: int = 1, bracket: tuple[float, float] | None = None) -> tuple[float, float]:
    """Location and value of the Neumann band minimum (root of the derivative)."""
    if bracket is None:
        bracket = (0.05 * np.sqrt(spec.b), 3.0 * np.sqrt(spec.b * (2 * j - 1)))
    f = lambda k: band_value_and_derivative(spec, j, k)[1]
    kmin = brent_root(f, *bracket, tol=1e-10)
    return kmin, band_value(spec, j, kmin)[0]

"""Classical potential of the RF-SQUID, its minima and small-oscillation modes.

Coordinates are the common/differential phases ``(sigma, delta)``; the
phase-slip circuit adds the lattice coordinate ``zeta = 2 pi m``.  Along
``w = sigma - delta`` the potential is corrugated by the weak link, while
``u = sigma + delta`` only sees the series inductance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import CircuitSpec, cpr_curvature, cpr_current, cpr_energy
from .errors import MergedWellsError, SingularPointError, VanishedWellError

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
#: smallest Hessian eigenvalue (GHz/rad^2) for a well to count as a minimum
VANISH_EIGENVALUE = 1e-6
DEDUP_DISTANCE = 1e-3
DEFAULT_WINDOW = (-3, 3)


@dataclass(frozen=True)
class PotentialField:
    """Potential energy of ``spec`` at external flux ``flux`` (in flux quanta).

    For the junction model the coordinates are ``(sigma, delta)``; for the
    phase-slip model they are ``(sigma, delta, zeta)``.  Gradients and
    Hessians are analytic and cover all coordinates.
    """

    spec: CircuitSpec
    flux: float

    @property
    def dimensionality(self):
        return 2 if self.spec.is_jj else 3

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        s, d = x[0], x[1]
        z = x[2] if x.shape[0] > 2 else 0.0
        return s, d, z

    def energy(self, x):
        """Energy (GHz); ``x`` may carry extra trailing axes for grid evaluation."""
        sp = self.spec
        s, d, z = self._split(x)
        v = 0.5 * sp.e_ls * (s + d) ** 2 + 0.5 * sp.e_lp * (s - d - TWO_PI * self.flux) ** 2
        if sp.is_jj:
            v = v + cpr_energy(d - s, sp.weak_link.e0, sp.weak_link.chi)
        else:
            v = v + 0.5 * sp.weak_link.e_lq * (s - d - z) ** 2
        return v

    def gradient(self, x):
        sp = self.spec
        s, d, z = self._split(x)
        a = sp.e_ls * (s + d)
        b = sp.e_lp * (s - d - TWO_PI * self.flux)
        if sp.is_jj:
            i = cpr_current(d - s, sp.weak_link.e0, sp.weak_link.chi)
            return np.array([a + b - i, a - b + i])
        q = sp.weak_link.e_lq * (s - d - z)
        return np.array([a + b + q, a - b - q, -q])

    def hessian(self, x):
        sp = self.spec
        s, d, _ = self._split(x)
        if sp.is_jj:
            c = cpr_curvature(d - s, sp.weak_link.e0, sp.weak_link.chi)
            p, m = sp.e_ls + sp.e_lp + c, sp.e_ls - sp.e_lp - c
            return np.array([[p, m], [m, p]])
        q = sp.weak_link.e_lq
        p, m = sp.e_ls + sp.e_lp + q, sp.e_ls - sp.e_lp - q
        return np.array([[p, m, -q], [m, p, q], [-q, q, q]])

    def grid(self, coord1, coord2, zeta=0.0):
        """Energies on the tensor grid ``coord1 x coord2`` of (sigma, delta)."""
        s, d = np.meshgrid(np.asarray(coord1, float), np.asarray(coord2, float), indexing="ij")
        if self.spec.is_jj:
            return self.energy(np.stack([s, d]))
        return self.energy(np.stack([s, d, np.full_like(s, zeta)]))


def build_potential(spec, flux):
    """Potential landscape of ``spec`` at ``flux``."""
    return PotentialField(spec, float(flux))


@dataclass(frozen=True, eq=False)
class MinimumRecord:
    """A located local minimum.

    ``hessian`` covers the continuous coordinates (sigma, delta) only.
    """

    position: np.ndarray
    value: float
    hessian: np.ndarray
    mode_freqs: np.ndarray
    well_index: int

    @property
    def w(self):
        return float(self.position[0] - self.position[1])

    def check(self, field, tol=1e-8):
        """Verify the record's own invariants against ``field``."""
        g = field.gradient(self.position)[:2]
        ok = np.linalg.norm(g) < tol
        ok &= bool(np.all(np.linalg.eigvalsh(self.hessian) > 0))
        ok &= np.allclose(self.mode_freqs, normal_modes(self.hessian, field.spec.charging))
        return bool(ok)


@dataclass(frozen=True)
class SeedFailure:
    well_index: int
    reason: str


@dataclass
class MinimaSearch:
    """Outcome of :func:`find_minima`."""

    minima: list = field(default_factory=list)
    vanished: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def by_index(self, n):
        for rec in self.minima:
            if rec.well_index == n:
                return rec
        return None


def normal_modes(hessian, charging):
    """Small-oscillation frequencies (GHz), ascending.

    For ``H = 4 n^T E_C n + 1/2 x^T K x`` the frequencies are
    ``sqrt(8 * eig(E_C^1/2 K E_C^1/2))``.
    """
    hessian = np.atleast_2d(np.asarray(hessian, float))
    ec = np.atleast_2d(np.asarray(charging, float))
    root = np.diag(np.sqrt(np.diag(ec))) if np.allclose(ec, np.diag(np.diag(ec))) else _sqrtm(ec)
    lam = np.linalg.eigvalsh(root @ hessian @ root)
    if np.any(lam <= 0):
        raise VanishedWellError(f"Hessian is not positive definite (eigenvalues {lam})")
    return np.sqrt(8 * lam)


def _sqrtm(a):
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(w)) @ v.T


def seed_position(spec, flux, n):
    """Analytic well centre of well ``n`` in the parabolic (sawtooth) limit."""
    if spec.is_jj:
        k = spec.weak_link.e0
        w = TWO_PI * (spec.e_lp * flux + k * n) / (spec.e_lp + k)
        lo, hi = TWO_PI * n - np.pi + 0.05, TWO_PI * n + np.pi - 0.05
        w = min(max(w, lo), hi)
        return np.array([w / 2, -w / 2])
    k = spec.weak_link.e_lq
    w = TWO_PI * (spec.e_lp * flux + k * n) / (spec.e_lp + k)
    return np.array([w / 2, -w / 2, TWO_PI * n])


def _well_index(field, x):
    if field.spec.is_jj:
        return int(np.round((x[0] - x[1]) / TWO_PI))
    return int(np.round(x[2] / TWO_PI))


def newton_minimize(field, x0, tol=1e-8, max_iter=200, max_step=0.5):
    """Damped Newton descent on the continuous coordinates (sigma, delta).

    Uses absolute Hessian eigenvalues so that every step is a descent
    direction, with an Armijo backtracking line search.  Returns the final
    point and a convergence flag.
    """
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        g = field.gradient(x)[:2]
        gn = np.linalg.norm(g)
        if gn < tol:
            return x, True
        h = field.hessian(x)[:2, :2]
        lam, vec = np.linalg.eigh(h)
        pd = lam[0] > 0
        lam = np.maximum(np.abs(lam), 1e-9 * max(np.abs(lam).max(), 1.0))
        step = -vec @ ((vec.T @ g) / lam)
        sn = np.linalg.norm(step)
        if sn > max_step:
            step *= max_step / sn
            sn = max_step
        if pd and sn < 1e-6:
            x[:2] += step
            continue
        f0 = field.energy(x)
        slope = g @ step
        t = 1.0
        while t > 1e-12:
            trial = x.copy()
            trial[:2] += t * step
            try:
                ft = field.energy(trial)
            except SingularPointError:
                ft = np.inf
            if ft <= f0 + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            return x, False
        x = trial
    g = field.gradient(x)[:2]
    return x, bool(np.linalg.norm(g) < tol)


def minimum_record(field, x, well_index=None):
    """Build a :class:`MinimumRecord` at a converged point.

    Raises :class:`VanishedWellError` when the Hessian is not positive
    definite within :data:`VANISH_EIGENVALUE`.
    """
    h = field.hessian(x)[:2, :2]
    if np.linalg.eigvalsh(h)[0] < VANISH_EIGENVALUE:
        raise VanishedWellError("stationary point is not a minimum")
    freqs = normal_modes(h, field.spec.charging)
    n = _well_index(field, x) if well_index is None else well_index
    return MinimumRecord(np.array(x), float(field.energy(x)), h, freqs, n)


def locate_well(field, n, start=None, tol=1e-8, max_iter=200):
    """Minimum of well ``n`` from ``start`` (default: analytic seed).

    Returns the record, or ``None`` when the well has vanished.  Raises
    :class:`~weaklink.errors.ConvergenceError` on Newton failure.
    """
    from .errors import ConvergenceError

    x0 = seed_position(field.spec, field.flux, n) if start is None else start
    try:
        x, ok = newton_minimize(field, x0, tol=tol, max_iter=max_iter)
    except SingularPointError:
        return None
    if _well_index(field, x) != n:
        return None
    if not ok:
        raise ConvergenceError(f"Newton did not converge for well {n}")
    try:
        return minimum_record(field, x, n)
    except VanishedWellError:
        return None


def find_minima(field, search_window=DEFAULT_WINDOW, tol=1e-8, max_iter=200):
    """Locate the minimum of every well ``n`` in ``search_window`` (inclusive).

    Wells that no longer hold a minimum go to ``vanished``; seeds on which
    Newton fails go to ``failures``.
    """
    from .errors import ConvergenceError

    lo, hi = search_window
    out = MinimaSearch()
    for n in range(lo, hi + 1):
        try:
            rec = locate_well(field, n, tol=tol, max_iter=max_iter)
        except ConvergenceError as exc:
            out.failures.append(SeedFailure(n, str(exc)))
            continue
        if rec is None:
            out.vanished.append(n)
            continue
        if any(np.linalg.norm(rec.position - r.position) < DEDUP_DISTANCE for r in out.minima):
            continue
        out.minima.append(rec)
    return out


def global_minimum(field, search_window=None):
    """Lowest minimum; the window defaults to +-3 wells around the flux."""
    if search_window is None:
        c = int(np.round(field.flux))
        search_window = (c - 3, c + 3)
    found = find_minima(field, search_window)
    if not found.minima:
        raise VanishedWellError("no minimum in the search window")
    return min(found.minima, key=lambda r: (r.value, abs(r.well_index)))


def _ridge_profile(field, w):
    """min over u of V at fixed corrugation coordinate w = sigma - delta."""
    u = 0.0
    for _ in range(3):
        x = np.array([(u + w) / 2, (u - w) / 2])
        g = field.gradient(x)
        h = field.hessian(x)
        # derivatives along u: d/du = (d/dsigma + d/ddelta) / 2
        gu = 0.5 * (g[0] + g[1])
        hu = 0.25 * (h[0, 0] + 2 * h[0, 1] + h[1, 1])
        u -= gu / hu
    return float(field.energy(np.array([(u + w) / 2, (u - w) / 2]))), u


def saddle_between(field, well_a, well_b):
    """Saddle point between two adjacent wells as ``(position, value)``."""
    if not field.spec.is_jj:
        raise ValueError("phase-slip wells are joined by tunnelling, not a classical saddle")
    if abs(well_a.well_index - well_b.well_index) != 1:
        raise ValueError("wells must be adjacent")
    wa, wb = sorted((well_a.w, well_b.w))
    res = minimize_scalar(
        lambda w: -_ridge_profile(field, w)[0],
        bounds=(wa, wb),
        method="bounded",
        options={"xatol": 1e-12},
    )
    cands = [res.x]
    # the sawtooth profile peaks on its cusp, at an odd multiple of pi
    k = np.arange(np.ceil((wa - np.pi) / TWO_PI), np.floor((wb - np.pi) / TWO_PI) + 1)
    cands.extend(np.pi + TWO_PI * k)
    vals = []
    for w in cands:
        try:
            vals.append(_ridge_profile(field, w)[0])
        except SingularPointError:
            vals.append(field.energy(np.array([w / 2, -w / 2])))
    i = int(np.argmax(vals))
    w_star, v_star = cands[i], vals[i]
    edge = 1e-7 * max(1.0, wb - wa)
    if w_star - wa < edge or wb - w_star < edge or v_star <= max(well_a.value, well_b.value):
        raise MergedWellsError("no barrier separates the wells")
    u_star = 0.0 if field.spec.weak_link.chi == 1.0 else _ridge_profile(field, w_star)[1]
    x = np.array([(u_star + w_star) / 2, (u_star - w_star) / 2])
    if field.spec.weak_link.chi < 1.0:
        x, v_star = _refine_saddle(field, x, v_star)
    return x, v_star


def _refine_saddle(field, x, v_guess, max_iter=20):
    y = x.copy()
    for _ in range(max_iter):
        g = field.gradient(y)
        if np.linalg.norm(g) < 1e-9:
            break
        y = y - np.linalg.solve(field.hessian(y), g)
        if np.linalg.norm(y - x) > 0.1:
            return x, v_guess
    lam = np.linalg.eigvalsh(field.hessian(y))
    if np.linalg.norm(field.gradient(y)) < 1e-6 and lam[0] < 0 < lam[1]:
        return y, float(field.energy(y))
    return x, v_guess


def barrier_height(field, well_a, well_b):
    """Saddle energy between adjacent wells minus the energy of ``well_a``."""
    _, v = saddle_between(field, well_a, well_b)
    return float(v - well_a.value)

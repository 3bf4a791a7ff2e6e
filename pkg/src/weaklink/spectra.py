"""Exact spectra of the single-loop junction and phase-slip circuits.

Junction circuit::

    H = 4 E_C n^2 + E_L/2 (phi - 2 pi flux)^2 + E_J(phi)

with the skewed energy-phase relation ``E_J``, diagonalised in the
oscillator basis of the total quadratic curvature centred at ``2 pi flux``.
Each harmonic ``cos(k phi)`` has exact matrix elements through the
displacement operator.

Phase-slip circuit::

    H = 4 E_C n^2 + E_L/2 (phi - 2 pi flux)^2 + E_LQ/2 (phi - 2 pi m)^2
        - E_Q/2 sum_m (|m+1><m| + h.c.)

diagonalised in a basis of oscillator states displaced into each sector.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded, eigh

from .circuit import JJLink, QPSLink
from .errors import ConvergenceError, DomainError
from .oscillator import displacement_matrix, ladder_squares

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
STABILITY_TOL = 1e-6
HARMONIC_TOL = 1e-14
HARMONIC_CHUNK = 16
JJ_DIM = 400
JJ_MAX_DIM = 1600
QPS_DIM = 60
QPS_HALF_WELLS = 10
QPS_MAX_DIM = 480
QPS_MAX_HALF_WELLS = 80
# wider bands go to the dense solver, which is faster there
BANDED_FRACTION = 0.06


@dataclass(frozen=True)
class SimpleSpec:
    """Single-loop circuit: charging and loop inductive energies plus a weak link (GHz).

    For the junction variant ``JJLink.e0`` plays the role of ``E_J``.
    """

    e_c: float
    e_l: float
    weak_link: JJLink | QPSLink
    flux: float = 0.0

    def __post_init__(self):
        if not (self.e_c > 0 and self.e_l > 0):
            raise DomainError("e_c and e_l must be positive")
        if isinstance(self.weak_link, JJLink):
            if self.weak_link.chi >= 1:
                raise DomainError("chi must be below 1 for the harmonic expansion")
        elif not isinstance(self.weak_link, QPSLink):
            raise DomainError("weak_link must be a JJLink or QPSLink")
        if not np.isfinite(self.flux):
            raise DomainError("flux must be finite")

    @property
    def is_jj(self):
        return isinstance(self.weak_link, JJLink)

    def at_flux(self, flux):
        return SimpleSpec(self.e_c, self.e_l, self.weak_link, float(flux))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Lowest eigenvalues (GHz) with per-level convergence flags.

    ``basis_dims`` records the truncation that produced ``eigenvalues``;
    ``converged[j]`` states whether level ``j`` moved by less than the
    stability tolerance when each truncation was doubled.
    """

    eigenvalues: np.ndarray
    basis_dims: dict
    converged: np.ndarray
    max_change: np.ndarray = field(default=None, repr=False)

    @property
    def all_converged(self):
        return bool(np.all(self.converged))

    def transitions(self):
        return self.eigenvalues - self.eigenvalues[0]


# junction circuit ------------------------------------------------------------


def _harmonic_coefficient(k, e_j, chi):
    return -e_j * (1 + chi) * (-chi) ** (k - 1) / k**2


def jj_hamiltonian(spec, dim):
    """Dense Galerkin matrix of the junction circuit in ``dim`` oscillator states."""
    if not spec.is_jj:
        raise ValueError("jj_hamiltonian needs the junction variant")
    e_c, e_l = spec.e_c, spec.e_l
    e_j, chi = spec.weak_link.e0, spec.weak_link.chi
    stiff = e_l + e_j
    z = (2 * e_c / stiff) ** 0.25
    x2, p2 = ladder_squares(dim)
    h = 4 * e_c * p2 / (4 * z * z) + 0.5 * e_l * z * z * x2
    centre = TWO_PI * spec.flux
    # phase i^(m - n) of <m|exp(i k phi_zpf (a + a^dag))|n>
    diff = np.subtract.outer(np.arange(dim), np.arange(dim)) % 4
    re = np.choose(diff, [1.0, 0.0, -1.0, 0.0])
    im = np.choose(diff, [0.0, 1.0, 0.0, -1.0])
    reach = np.sqrt(4 * dim) + 10
    k0 = 1
    while True:
        ks = np.arange(k0, k0 + HARMONIC_CHUNK)
        stack = displacement_matrix(ks * z, dim)
        for k, d in zip(ks, stack):
            c = _harmonic_coefficient(k, e_j, chi)
            h += c * (np.cos(k * centre) * re - np.sin(k * centre) * im) * d
            if abs(c) * np.abs(d).max() < HARMONIC_TOL and k * z > reach:
                return h
        k0 += HARMONIC_CHUNK


def _lowest(h, n):
    return eigh(h, eigvals_only=True, subset_by_index=[0, n - 1])


def spectrum_jj(spec, n_levels=10, dim=JJ_DIM, max_dim=JJ_MAX_DIM, tol=STABILITY_TOL):
    """Lowest ``n_levels`` of the junction circuit, doubling the basis until stable."""
    if n_levels < 1 or n_levels > dim:
        raise ValueError("n_levels must lie in [1, dim]")
    cur = _lowest(jj_hamiltonian(spec, dim), n_levels)
    while True:
        nxt = _lowest(jj_hamiltonian(spec, 2 * dim), n_levels)
        change = np.abs(nxt - cur)
        ok = change < tol
        if ok.all() or 2 * dim >= max_dim:
            if not ok.all():
                log.warning("junction spectrum unconverged at dimension %d", dim)
            return Spectrum(cur, {"oscillator": dim}, ok, change)
        dim, cur = 2 * dim, nxt


# phase-slip circuit ----------------------------------------------------------


def qps_geometry(spec):
    """Oscillator frequency, series energy and sector displacement (oscillator lengths)."""
    e_lq = spec.weak_link.e_lq
    k = spec.e_l + e_lq
    f = np.sqrt(8 * spec.e_c * k)
    length = (8 * spec.e_c / k) ** 0.25
    e_series = spec.e_l * e_lq / k
    d = TWO_PI * e_lq / k / length
    return f, e_series, d


def _sector_window(flux, half):
    c = int(np.round(flux))
    return np.arange(c - half, c + half + 1)


def qps_blocks(spec, dim, half_wells):
    """Diagonal energies per sector and the common hopping block.

    Returns ``(sectors, diag, hop)`` where ``diag[i]`` holds the energies of
    sector ``sectors[i]`` and ``hop[j, i]`` couples level ``i`` of sector
    ``m`` to level ``j`` of sector ``m + 1``.
    """
    if spec.is_jj:
        raise ValueError("qps_blocks needs the phase-slip variant")
    f, e_series, d = qps_geometry(spec)
    sectors = _sector_window(spec.flux, half_wells)
    n = np.arange(dim)
    well = 0.5 * e_series * TWO_PI**2 * (spec.flux - sectors) ** 2
    diag = well[:, None] + f * (n + 0.5)[None, :]
    hop = -0.5 * spec.weak_link.e_q * displacement_matrix(d / np.sqrt(2), dim).T
    return sectors, diag, hop


def qps_hamiltonian(spec, dim, half_wells):
    """Dense block-tridiagonal matrix of the phase-slip circuit."""
    sectors, diag, hop = qps_blocks(spec, dim, half_wells)
    w = sectors.size
    h = np.zeros((w * dim, w * dim))
    h[np.diag_indices(w * dim)] = diag.ravel()
    for i in range(w - 1):
        r = slice((i + 1) * dim, (i + 2) * dim)
        c = slice(i * dim, (i + 1) * dim)
        h[r, c] = hop
        h[c, r] = hop.T
    return h


def _qps_lowest(spec, dim, half_wells, n):
    sectors, diag, hop = qps_blocks(spec, dim, half_wells)
    w = sectors.size
    size = w * dim
    band = 2 * dim - 1
    if band > BANDED_FRACTION * size:
        return _lowest(qps_hamiltonian(spec, dim, half_wells), n)
    ab = np.zeros((band + 1, size))
    ab[0] = diag.ravel()
    # lower band storage: ab[r - c, c] = H[r, c]
    rows, cols = np.nonzero(np.ones((dim, dim)))
    for i in range(w - 1):
        r = rows + (i + 1) * dim
        c = cols + i * dim
        ab[r - c, c] = hop[rows, cols]
    return eig_banded(ab, lower=True, eigvals_only=True, select="i", select_range=(0, n - 1))


def spectrum_qps(spec, n_levels=10, dim=QPS_DIM, half_wells=QPS_HALF_WELLS,
                 max_dim=QPS_MAX_DIM, max_half_wells=QPS_MAX_HALF_WELLS,
                 tol=STABILITY_TOL, auto_converge=True):
    """Lowest ``n_levels`` of the phase-slip circuit.

    The oscillator truncation and the sector window are doubled separately
    until neither changes any level by ``tol``.  With ``auto_converge``
    off a single doubling test is made and the flags reported as found.
    """
    if spec.is_jj:
        raise ValueError("spectrum_qps needs the phase-slip variant")
    cur = _qps_lowest(spec, dim, half_wells, n_levels)
    while True:
        by_dim = np.abs(_qps_lowest(spec, 2 * dim, half_wells, n_levels) - cur)
        by_wells = np.abs(_qps_lowest(spec, dim, 2 * half_wells, n_levels) - cur)
        ok_dim = by_dim < tol
        ok_wells = by_wells < tol
        ok = ok_dim & ok_wells
        done = ok.all() or not auto_converge
        grow_dim = not ok_dim.all() and 2 * dim <= max_dim
        grow_wells = not ok_wells.all() and 2 * half_wells <= max_half_wells
        if done or not (grow_dim or grow_wells):
            if not ok.all():
                log.warning("phase-slip spectrum unconverged at (%d, %d)", dim, half_wells)
            return Spectrum(cur, {"oscillator": dim, "sectors": 2 * half_wells + 1}, ok,
                            np.maximum(by_dim, by_wells))
        dim = 2 * dim if grow_dim else dim
        half_wells = 2 * half_wells if grow_wells else half_wells
        cur = _qps_lowest(spec, dim, half_wells, n_levels)


def spectrum(spec, n_levels=10, **kwargs):
    """Dispatch on the weak-link variant."""
    return spectrum_jj(spec, n_levels, **kwargs) if spec.is_jj else spectrum_qps(spec, n_levels, **kwargs)


def compare_spectra(jj, qps, k):
    """Transition-energy differences ``|E_j - E_0|`` between two spectra for j = 1..k.

    Raises
    ------
    ConvergenceError
        If either spectrum is not converged up to level ``k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    for name, s in (("first", jj), ("second", qps)):
        if s.eigenvalues.size <= k:
            raise ValueError(f"{name} spectrum has fewer than {k + 1} levels")
        if not np.all(s.converged[: k + 1]):
            raise ConvergenceError(f"{name} spectrum is not converged up to level {k}")
    return np.abs(jj.transitions()[1 : k + 1] - qps.transitions()[1 : k + 1])


def fold_flux(flux):
    """Representative of ``flux`` in [0, 0.5] under periodicity and inversion."""
    r = float(flux) % 1.0
    return min(r, 1.0 - r)


def spectrum_sweep(spec, fluxes, n_levels=10, **kwargs):
    """Spectra over a flux grid.

    Both circuits are periodic in flux and symmetric under flux inversion,
    so each flux is folded into [0, 0.5] and repeated values are solved once.
    """
    cache = {}
    out = []
    for phi in np.asarray(fluxes, float):
        key = round(fold_flux(phi), 12)
        if key not in cache:
            cache[key] = spectrum(spec.at_flux(key), n_levels, **kwargs)
        out.append(cache[key])
    return out

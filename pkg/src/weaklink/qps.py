"""Quantum treatment of the phase-slip circuit.

The light differential mode is eliminated adiabatically, leaving one
harmonic well per winding sector ``zeta = 2 pi m``.  All wells share the same
curvature and are displaced by a fixed distance ``d`` (in oscillator
lengths).  The phase-slip term hops between neighbouring sectors with
amplitude ``E_Q / 2`` times the Franck-Condon overlap of the displaced
oscillator states, and second-order perturbation theory in that hopping
gives the level shifts that bend the resonance near the critical flux.

Oscillator lengths follow the convention that the ground state is
``exp(-x^2 / 2)``, i.e. ``length = (8 E_C / k)^(1/4)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitSpec
from .errors import ConvergenceError, CriticalFluxNotFound, DomainError, ResonanceError
from .landscape import build_potential
from .oscillator import overlap_column_log
from .sweep import ResonanceCurve

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
MAX_LEVELS = 120
DEGENERACY_FLOOR = 1e-6
TAIL_RATIO = 1e-3
LEVEL_CAP = 1 << 18
# wells per second; reproduces the observed switching flux with factor 1
DEFAULT_RAMP_RATE = 1e4
RATE_FACTOR = 1.0
GHZ_TO_RATE = 1e9


def _require_qps(spec):
    if spec.is_jj:
        raise ValueError("this operation needs the phase-slip model")


def _delta_stiffness(spec):
    return spec.e_ls + spec.e_lp + spec.weak_link.e_lq


def relaxed_delta(spec, flux, sigma, m):
    """Differential phase minimising the potential at fixed ``sigma`` in sector ``m``."""
    e_lq = spec.weak_link.e_lq
    sigma = np.asarray(sigma, float)
    num = -spec.e_ls * sigma + spec.e_lp * (sigma - TWO_PI * flux) + e_lq * (sigma - TWO_PI * m)
    return num / _delta_stiffness(spec)


def delta_ground_energy(spec, flux, sigma, m):
    """Ground energy of the fast mode at frozen ``sigma``: potential minimum plus zero-point term."""
    _require_qps(spec)
    fld = build_potential(spec, flux)
    sigma = np.atleast_1d(np.asarray(sigma, float))
    delta = relaxed_delta(spec, flux, sigma, m)
    pts = np.stack([sigma, delta, np.full_like(sigma, TWO_PI * m)], axis=-1)
    vmin = np.array([fld.energy(p) for p in pts])
    zpe = 0.5 * np.sqrt(8 * spec.e_c_delta * _delta_stiffness(spec))
    out = vmin + zpe
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class WellEntry:
    """Adiabatic well of sector ``m``: centre (rad), bottom energy and curvature."""

    m: int
    center: float
    energy: float
    stiffness: float


def born_oppenheimer_reduce(spec, flux, m, n_grid=41):
    """Fit the adiabatic potential of sector ``m`` with a parabola.

    The fast-mode ground energy is sampled on a grid of common-mode phases
    around the well and fitted by a quadratic; its vertex and curvature
    define the well.
    """
    _require_qps(spec)
    e_lq = spec.weak_link.e_lq
    # coarse centre from the joint quadratic minimum
    k_w = spec.e_lp + e_lq
    w0 = (spec.e_lp * TWO_PI * flux + e_lq * TWO_PI * m) / k_w
    c0 = w0 / 2
    k_guess = 4 * spec.e_ls * k_w / (spec.e_ls + k_w)
    half = 4 * (8 * spec.e_c_sigma / k_guess) ** 0.25
    x = np.linspace(-half, half, n_grid)
    y = delta_ground_energy(spec, flux, c0 + x, m)
    a, b, c = np.polyfit(x, y, 2)
    if a <= 0:
        raise DomainError("adiabatic potential is not confining")
    return WellEntry(m=int(m), center=float(c0 - b / (2 * a)), energy=float(c - b * b / (4 * a)),
                     stiffness=float(2 * a))


@dataclass(frozen=True, eq=False)
class WellBasis:
    """Displaced-oscillator basis shared by a set of neighbouring wells.

    Attributes
    ----------
    wells : ndarray of int
        Sector indices ``m``.
    centers, energies : ndarray
        Well centres (rad) and bottom energies (GHz).
    f_osc : float
        Common oscillator frequency (GHz).
    length : float
        Oscillator length (rad); the ground state is ``exp(-(x / length)^2 / 2)``.
    displacement : float
        Distance between adjacent wells in units of ``length``.
    """

    flux: float
    wells: np.ndarray
    centers: np.ndarray
    energies: np.ndarray
    f_osc: float
    length: float
    displacement: float

    def energy_of(self, m):
        idx = np.flatnonzero(self.wells == m)
        if idx.size == 0:
            raise KeyError(f"well {m} is not part of this basis")
        return float(self.energies[idx[0]])

    def level_energy(self, m, n):
        return self.energy_of(m) + self.f_osc * (n + 0.5)


def well_basis(spec, flux, wells=(-1, 0, 1)):
    """Reduce the sectors in ``wells`` (at least two adjacent ones) at ``flux``."""
    _require_qps(spec)
    wells = np.array(sorted(set(int(m) for m in wells)))
    if wells.size < 2 or np.any(np.diff(wells) != 1):
        raise ValueError("wells must be at least two consecutive sector indices")
    entries = [born_oppenheimer_reduce(spec, flux, m) for m in wells]
    k = np.array([e.stiffness for e in entries])
    if np.ptp(k) > 1e-6 * k.mean():
        raise ConvergenceError("adiabatic wells disagree in curvature")
    k = k.mean()
    f_osc = float(np.sqrt(8 * spec.e_c_sigma * k))
    length = float((8 * spec.e_c_sigma / k) ** 0.25)
    centers = np.array([e.center for e in entries])
    d = float(np.mean(np.diff(centers)) / length)
    return WellBasis(float(flux), wells, centers, np.array([e.energy for e in entries]),
                     f_osc, length, d)


@dataclass(frozen=True, eq=False)
class PTShift:
    """Second-order shift of level ``level`` of the occupied well.

    ``couplings[nu]`` lists ``|<partner m| V |level>|`` in GHz for the
    neighbour ``nu`` in {-1, +1} and ``contributions[nu]`` its share of the
    shift; ``partner`` is the ``(nu, m)`` pair with the smallest energy gap.
    """

    level: int
    shift: float
    partner: tuple
    couplings: dict = field(repr=False)
    contributions: dict = field(default_factory=dict)
    levels_used: int = 0


def second_order_shift(energy, partner_energies, couplings):
    """Rayleigh-Schroedinger second-order shift ``sum |V|^2 / (E - E_m)``."""
    gaps = energy - np.asarray(partner_energies, float)
    return float(np.sum(np.asarray(couplings, float) ** 2 / gaps))


def _log_couplings(n, m_max, d, e_q):
    _, logabs = overlap_column_log(n, m_max, d)
    return np.log(e_q / 2) + logabs


def _default_cutoff(n, d, max_levels):
    lam = d * d / 2
    return int(max(max_levels, n + lam + 15 * np.sqrt(lam) + 30))


def pt_shift(basis, n, e_q, well=0, max_levels=MAX_LEVELS, floor=DEGENERACY_FLOOR):
    """Second-order phase-slip shift of level ``n`` in sector ``well``.

    Both neighbouring sectors contribute.  The level cutoff starts at
    ``max_levels`` (raised to cover the Franck-Condon window) and doubles
    until the last retained term is below ``TAIL_RATIO`` of the sum.

    Raises
    ------
    ResonanceError
        If a partner level lies within ``floor`` GHz of the level.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"level must be a non-negative integer, got {n!r}")
    n = int(n)
    if e_q < 0:
        raise DomainError("e_q must be non-negative")
    e_n = basis.level_energy(well, n)
    if e_q == 0:
        zero = {1: 0.0, -1: 0.0}
        return PTShift(n, 0.0, (1, n), {1: np.zeros(1), -1: np.zeros(1)}, zero, 0)
    m_max = _default_cutoff(n, basis.displacement, max_levels)
    while True:
        couplings, parts = {}, {}
        best = (np.inf, 1, n)
        last = 0.0
        for nu in (1, -1):
            lc = _log_couplings(n, m_max, basis.displacement, e_q)
            couplings[nu] = np.exp(lc)
            partners = basis.energy_of(well + nu) + basis.f_osc * (np.arange(m_max + 1) + 0.5)
            gaps = e_n - partners
            i = int(np.argmin(np.abs(gaps)))
            if abs(gaps[i]) < floor:
                raise ResonanceError(n, i, nu, float(gaps[i]))
            if abs(gaps[i]) < best[0]:
                best = (abs(gaps[i]), nu, i)
            parts[nu] = second_order_shift(e_n, partners, couplings[nu])
            last = max(last, abs(np.exp(2 * lc[-1]) / gaps[-1]))
        total = parts[1] + parts[-1]
        if last <= TAIL_RATIO * abs(total) or last == 0.0:
            return PTShift(n, total, best[1:], couplings, parts, m_max + 1)
        m_max *= 2
        if m_max > LEVEL_CAP:
            raise ConvergenceError("perturbation sum did not converge within the level cap")


def bare_frequency(basis, e_q, well=0, levels="both"):
    """Shifted 0 -> 1 transition of the occupied well (GHz).

    ``levels="both"`` shifts both levels; ``"upper"`` shifts only level 1.
    """
    s1 = pt_shift(basis, 1, e_q, well).shift
    if levels == "both":
        return basis.f_osc + s1 - pt_shift(basis, 0, e_q, well).shift
    if levels == "upper":
        return basis.f_osc + s1
    raise ValueError("levels must be 'both' or 'upper'")


def crossing_table(spec, level=0, m_max=None):
    """Fluxes where ``level`` of sector 0 is degenerate with levels of sector 1.

    Returns
    -------
    flux : ndarray
        Crossing flux for each partner level ``m >= level``.
    log_coupling : ndarray
        Natural log of the hopping matrix element (GHz) at each crossing.
    partners : ndarray
        Partner level indices.
    """
    _require_qps(spec)
    e_q = spec.weak_link.e_q
    b0 = well_basis(spec, 0.0, (0, 1))
    b1 = well_basis(spec, 1.0, (0, 1))
    # well energy difference E(0) - E(1) is affine in flux
    g0 = b0.energy_of(0) - b0.energy_of(1)
    g1 = b1.energy_of(0) - b1.energy_of(1)
    slope = g1 - g0
    if m_max is None:
        m_max = _default_cutoff(level, b0.displacement, MAX_LEVELS)
    partners = np.arange(level, m_max + 1)
    flux = (b0.f_osc * (partners - level) - g0) / slope
    lc = _log_couplings(level, m_max, b0.displacement, e_q)[level:]
    return flux, lc, partners


def critical_flux(spec, ramp_rate=DEFAULT_RAMP_RATE, factor=RATE_FACTOR, level=0):
    """Flux at which the occupied well is abandoned on an up-sweep from sector 0.

    The resonant hopping rate at each level crossing is compared with
    ``ramp_rate * factor`` (ramp rate in flux quanta, i.e. wells, per
    second).  The first crossing whose rate reaches the threshold wins.
    """
    if ramp_rate < 0 or factor < 0:
        raise DomainError("ramp_rate and factor must be non-negative")
    flux, lc, _ = crossing_table(spec, level)
    threshold = ramp_rate * factor
    log_rate = lc + np.log(GHZ_TO_RATE)
    with np.errstate(divide="ignore"):
        ok = np.flatnonzero(log_rate >= np.log(threshold)) if threshold > 0 else np.arange(flux.size)
    if ok.size == 0:
        raise CriticalFluxNotFound(
            f"no crossing up to flux {flux[-1]:.3f} reaches {threshold:g} per second"
        )
    return float(flux[ok[0]])


def coupling_vs_index(spec, flux, level=0, m_max=None):
    """Hopping matrix elements from ``level`` of sector 0 to every level of sector 1.

    Returns level indices, couplings (GHz) and a boolean mask marking the
    level closest to resonance at ``flux``.
    """
    _require_qps(spec)
    basis = well_basis(spec, flux, (0, 1))
    if m_max is None:
        m_max = _default_cutoff(level, basis.displacement, MAX_LEVELS)
    idx = np.arange(m_max + 1)
    coup = np.exp(_log_couplings(level, m_max, basis.displacement, spec.weak_link.e_q))
    gaps = basis.level_energy(0, level) - (basis.energy_of(1) + basis.f_osc * (idx + 0.5))
    flag = np.zeros(idx.size, bool)
    flag[int(np.argmin(np.abs(gaps)))] = True
    return idx, coup, flag


def _fast_enough(spec, exc, threshold):
    b = well_basis(spec, 0.0, (0, 1))
    lc = _log_couplings(exc.level, exc.partner, b.displacement, spec.weak_link.e_q)[-1]
    return lc + np.log(GHZ_TO_RATE) >= np.log(threshold) if threshold > 0 else True


def qps_resonance_curve(spec, fluxes, initial_well=0, levels="both",
                        ramp_rate=DEFAULT_RAMP_RATE, factor=RATE_FACTOR):
    """Perturbative resonance curve with switching at the critical flux.

    The occupied sector changes by one whenever the flux offset from it
    passes the critical flux (mirrored for down-sweeps), or when the
    perturbation sum hits a degeneracy with the sector ahead whose hopping
    rate reaches the threshold.  Other degeneracies leave a NaN frequency
    at that point.
    """
    _require_qps(spec)
    fluxes = np.asarray(fluxes, float)
    if fluxes.size > 1:
        steps = np.diff(fluxes)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("fluxes must be strictly monotone")
    up = fluxes.size < 2 or fluxes[-1] > fluxes[0]
    offset = critical_flux(spec, ramp_rate, factor)
    threshold = ramp_rate * factor
    e_q = spec.weak_link.e_q
    well = int(initial_well)
    f_bare, wells, jumped, jumps = [], [], [], []
    for i, phi in enumerate(fluxes):
        did_jump = False
        while True:
            beyond = (phi - well > offset) if up else (phi - well < -offset)
            if not beyond:
                try:
                    f = bare_frequency(well_basis(spec, phi, (well - 1, well, well + 1)), e_q, well, levels)
                    break
                except ResonanceError as exc:
                    if exc.neighbour != (1 if up else -1) or not _fast_enough(spec, exc, threshold):
                        # too weak to switch, but the perturbation sum is undefined here
                        log.warning("perturbation sum singular at flux %.6f: %s", phi, exc)
                        f = np.nan
                        break
                    log.debug("degeneracy at flux %.6f triggers a jump: %s", phi, exc)
            if i == 0:
                raise ValueError(f"sector {well} is already abandoned at the first flux point")
            jumps.append(well + (offset if up else -offset) if beyond else phi)
            well += 1 if up else -1
            did_jump = True
        f_bare.append(f)
        wells.append(well)
        jumped.append(did_jump)
    return ResonanceCurve(fluxes.copy(), f_bare, wells, jumped, "up" if up else "down",
                          jump_fluxes=jumps)

"""Semiclassical flux sweeps with metastable-well tracking.

The phase particle stays in its well while the flux ramps.  When the well
stops being a minimum, the particle drops into the adjacent well of lower
energy.  The vanishing flux is localised by bisection so jump positions do
not depend on the sweep grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import CircuitSpec
from .errors import VanishedWellError
from .landscape import build_potential, global_minimum, locate_well

log = logging.getLogger(__name__)

DEFAULT_FLUX_STEP = 2e-3
JUMP_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class SweepPlan:
    """Flux ramp for :func:`run_sweep`.

    ``initial_well`` is a well index or ``"global-minimum"``.
    """

    flux_values: np.ndarray
    spec: CircuitSpec
    initial_well: int | str = "global-minimum"

    def __post_init__(self):
        flux = np.asarray(self.flux_values, dtype=float)
        if flux.ndim != 1 or flux.size == 0:
            raise ValueError("flux_values must be a non-empty 1-D sequence")
        if flux.size > 1:
            steps = np.diff(flux)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValueError("flux_values must be strictly monotone")
        if not (isinstance(self.initial_well, (int, np.integer)) or self.initial_well == "global-minimum"):
            raise ValueError("initial_well must be an integer or 'global-minimum'")
        object.__setattr__(self, "flux_values", flux)

    @classmethod
    def ramp(cls, spec, start, stop, step=DEFAULT_FLUX_STEP, initial_well="global-minimum"):
        """Evenly spaced ramp from ``start`` to ``stop`` (either direction)."""
        n = int(round(abs(stop - start) / step)) + 1
        return cls(np.linspace(start, stop, n), spec, initial_well)


@dataclass(eq=False)
class ResonanceCurve:
    """Resonance frequency versus flux along one sweep direction.

    ``jump_fluxes`` holds the localised flux of every jump, which lies
    between the grid point flagged ``jumped`` and its predecessor.
    """

    flux: np.ndarray
    f_bare: np.ndarray
    well_index: np.ndarray
    jumped: np.ndarray
    direction: str
    f_hybridized: np.ndarray | None = None
    jump_fluxes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.flux = np.asarray(self.flux, float)
        self.f_bare = np.asarray(self.f_bare, float)
        self.well_index = np.asarray(self.well_index, int)
        self.jumped = np.asarray(self.jumped, bool)
        self.jump_fluxes = np.asarray(self.jump_fluxes, float)
        if self.f_hybridized is not None:
            self.f_hybridized = np.asarray(self.f_hybridized, float)
        dn = np.diff(self.well_index)
        if np.any((dn != 0) & ~self.jumped[1:]) or np.any(np.abs(dn[self.jumped[1:]]) != 1):
            raise ValueError("well index may change only by one, and only at flagged jumps")

    def __len__(self):
        return self.flux.size

    def with_hybridized(self, f_hybridized):
        return replace(self, f_hybridized=np.asarray(f_hybridized, float))

    def segment(self, lo, hi):
        """Copy restricted to ``lo <= flux <= hi`` (jump flags kept as-is)."""
        m = (self.flux >= lo) & (self.flux <= hi)
        return ResonanceCurve(
            self.flux[m],
            self.f_bare[m],
            self.well_index[m],
            self.jumped[m] & np.r_[False, m[:-1]][m] if m.any() else self.jumped[m],
            self.direction,
            None if self.f_hybridized is None else self.f_hybridized[m],
            self.jump_fluxes[(self.jump_fluxes >= lo) & (self.jump_fluxes <= hi)],
        )


def _initial_record(spec, flux, initial_well):
    fld = build_potential(spec, flux)
    if initial_well == "global-minimum":
        return global_minimum(fld)
    rec = locate_well(fld, int(initial_well))
    if rec is None:
        raise VanishedWellError(f"initial well {initial_well} does not exist at flux {flux:g}")
    return rec


def _localise_jump(spec, n, lo, hi, x_lo, tol):
    """Bisect for the flux where well ``n`` vanishes, between ``lo`` (alive) and ``hi``."""
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        rec = locate_well(build_potential(spec, mid), n, start=x_lo)
        if rec is None:
            hi = mid
        else:
            lo, x_lo = mid, rec.position
    return 0.5 * (lo + hi)


def _drop(fld, n):
    """Minimum of the lower-energy neighbour of well ``n``."""
    options = [r for r in (locate_well(fld, n - 1), locate_well(fld, n + 1)) if r is not None]
    if not options:
        raise VanishedWellError(f"no neighbour of well {n} exists at flux {fld.flux:g}")
    return min(options, key=lambda r: r.value)


def run_sweep(plan, jump_tolerance=JUMP_TOLERANCE):
    """Track the occupied well along ``plan`` and return the bare resonance curve."""
    spec = plan.spec
    if not spec.is_jj:
        raise ValueError("run_sweep needs the junction model; use qps.qps_resonance_curve")
    flux = plan.flux_values
    direction = "down" if flux.size > 1 and flux[-1] < flux[0] else "up"

    rec = _initial_record(spec, flux[0], plan.initial_well)
    f_bare = [rec.mode_freqs[0]]
    wells = [rec.well_index]
    jumped = [False]
    jumps = []
    for prev, phi in zip(flux[:-1], flux[1:]):
        fld = build_potential(spec, phi)
        new = locate_well(fld, rec.well_index, start=rec.position)
        did_jump = False
        if new is None:
            phic = _localise_jump(spec, rec.well_index, prev, phi, rec.position, jump_tolerance)
            jumps.append(phic)
            log.debug("well %d vanished at flux %.6f", rec.well_index, phic)
            new = _drop(fld, rec.well_index)
            did_jump = True
        rec = new
        f_bare.append(rec.mode_freqs[0])
        wells.append(rec.well_index)
        jumped.append(did_jump)
    return ResonanceCurve(flux.copy(), f_bare, wells, jumped, direction, jump_fluxes=jumps)


def hysteresis_pair(spec, flux_lo, flux_hi, n_points):
    """Up and down sweeps over ``[flux_lo, flux_hi]``, each from its global minimum."""
    if not flux_lo < flux_hi:
        raise ValueError("flux_lo must be below flux_hi")
    grid = np.linspace(flux_lo, flux_hi, n_points)
    up = run_sweep(SweepPlan(grid, spec))
    down = run_sweep(SweepPlan(grid[::-1], spec))
    return up, down

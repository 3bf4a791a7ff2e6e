"""Least-squares matching of modelled resonance curves to data."""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.optimize import minimize

from .cavity import CavityParams, hybridize
from .circuit import CircuitSpec
from .errors import WeakLinkError

log = logging.getLogger(__name__)

NON_UNIQUE = ("the fitted parameters are not unique; other combinations may reproduce "
              "the data equally well")
CIRCUIT_NAMES = ("e_c_sigma", "e_c_delta", "e_ls", "e_lp", "e0", "chi", "e_q", "e_lq")
CAVITY_NAMES = ("f_a", "f_b", "g_a", "g_b")


class NonUniqueFitWarning(UserWarning):
    pass


def apply_params(spec, cav, values):
    """Copies of ``spec`` and ``cav`` with named parameters replaced."""
    circ = {k: v for k, v in values.items() if k in CIRCUIT_NAMES}
    cavp = {k: v for k, v in values.items() if k in CAVITY_NAMES}
    unknown = set(values) - set(circ) - set(cavp)
    if unknown:
        raise KeyError(f"unknown parameters: {sorted(unknown)}")
    return (spec.with_params(**circ) if circ else spec), (replace(cav, **cavp) if cavp else cav)


def current_value(spec, cav, name):
    if name in CAVITY_NAMES:
        return float(getattr(cav, name))
    if name in ("e0", "chi", "e_q", "e_lq"):
        return float(getattr(spec.weak_link, name))
    return float(getattr(spec, name))


def curve_model(flux, initial_well=0, branch=0, **qps_options):
    """Model pipeline: flux sweep, then the chosen dressed branch."""
    from .qps import qps_resonance_curve
    from .sweep import SweepPlan, run_sweep

    flux = np.asarray(flux, float)

    def model(spec, cav):
        if spec.is_jj:
            curve = run_sweep(SweepPlan(flux, spec, initial_well))
        else:
            curve = qps_resonance_curve(spec, flux, initial_well, **qps_options)
        return hybridize(curve.f_bare, cav)[:, branch]

    return model


@dataclass(frozen=True, eq=False)
class FitProblem:
    """Data, starting model and the parameters to vary.

    ``bounds`` maps every free parameter name to a finite ``(lo, hi)``
    pair.  The start point is ``initial`` where given, else the value in
    ``spec``/``cavity``.
    """

    flux: np.ndarray
    frequency: np.ndarray
    spec: CircuitSpec
    cavity: CavityParams
    free: tuple
    bounds: dict
    initial: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "flux", np.asarray(self.flux, float))
        object.__setattr__(self, "frequency", np.asarray(self.frequency, float))
        object.__setattr__(self, "free", tuple(self.free))
        if not self.free:
            raise ValueError("at least one parameter must be free")
        if self.flux.shape != self.frequency.shape:
            raise ValueError("flux and frequency must have the same shape")
        for name in self.free:
            if name not in CIRCUIT_NAMES + CAVITY_NAMES:
                raise ValueError(f"unknown parameter {name!r}")
            lo, hi = self.bounds.get(name, (np.nan, np.nan))
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"parameter {name!r} needs finite bounds lo < hi")

    def start(self):
        return np.array([self.initial.get(n, current_value(self.spec, self.cavity, n))
                         for n in self.free])


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: CircuitSpec
    cavity: CavityParams
    params: dict
    residuals: np.ndarray
    loss: float
    iterations: int
    evaluations: int
    hit_max_iter: bool
    rejected: int
    warnings: tuple

    @property
    def rms(self):
        r = self.residuals[np.isfinite(self.residuals)]
        return float(np.sqrt(np.mean(r * r)))

    def report(self):
        return {
            "parameters": self.params,
            "circuit": self.spec.to_dict(),
            "cavity": self.cavity.to_dict(),
            "loss_ghz2": self.loss,
            "rms_ghz": self.rms,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "max_iterations_reached": self.hit_max_iter,
            "rejected_steps": self.rejected,
            "residuals_ghz": [None if not np.isfinite(r) else float(r) for r in self.residuals],
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return json.dumps(self.report(), indent=2, sort_keys=True)


def fit(problem, model=None, max_iter=400, xatol=1e-7, fatol=1e-14):
    """Nelder-Mead search over the free parameters, scaled to the unit box.

    Parameter sets whose pipeline raises or returns non-finite values are
    rejected (infinite loss) and counted.  Data points that are NaN are
    ignored.

    Raises
    ------
    ValueError
        If the pipeline already fails at the starting point.
    """
    model = model or curve_model(problem.flux)
    lo = np.array([problem.bounds[n][0] for n in problem.free], float)
    hi = np.array([problem.bounds[n][1] for n in problem.free], float)
    span = hi - lo
    keep = np.isfinite(problem.frequency)
    rejected = 0

    def unpack(u):
        return dict(zip(problem.free, (lo + span * np.asarray(u)).tolist()))

    def loss(u):
        nonlocal rejected
        try:
            spec, cav = apply_params(problem.spec, problem.cavity, unpack(u))
            pred = model(spec, cav)
        except (WeakLinkError, ValueError) as exc:
            rejected += 1
            log.debug("rejected step: %s", exc)
            return np.inf
        r = pred[keep] - problem.frequency[keep]
        val = float(np.sum(r * r))
        if not np.isfinite(val):
            rejected += 1
            log.debug("rejected step with non-finite loss")
            return np.inf
        return val

    u0 = np.clip((problem.start() - lo) / span, 0.0, 1.0)
    if not np.isfinite(loss(u0)):
        raise ValueError("the model pipeline fails at the starting point")
    res = minimize(loss, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * len(problem.free),
                   options={"maxiter": max_iter, "xatol": xatol, "fatol": fatol})
    params = unpack(res.x)
    spec, cav = apply_params(problem.spec, problem.cavity, params)
    residuals = model(spec, cav) - problem.frequency
    notes = [NON_UNIQUE]
    hit_max = res.nit >= max_iter
    if hit_max:
        notes.append("maximum iterations reached before the tolerance was met")
    warnings.warn(NON_UNIQUE, NonUniqueFitWarning, stacklevel=2)
    return FitResult(spec, cav, params, residuals, float(res.fun), int(res.nit), int(res.nfev),
                     bool(hit_max), rejected, tuple(notes))

"""Circuit parameters and weak-link constitutive relations.

Units throughout the package: energies are frequency equivalents E/h in GHz,
external flux is in units of the flux quantum, phases are in radians,
capacitances in fF and inductances in pH.

The skewed energy-phase relation of the weak link is

    E(phi) = -E0 (1 + chi) sum_k (-chi)^(k-1) cos(k phi) / k^2,

interpolating between a cosine (chi = 0) and the parabolic sawtooth limit
(chi = 1).  The series is evaluated in closed form through the dilogarithm;
``chi == 1`` is handled by the exact parabola.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np
import scipy.constants as const
from scipy.special import spence

from .errors import ConfigError, DomainError, SingularPointError

PHI0 = const.physical_constants["mag. flux quantum"][0]


def inductance_to_energy(l):
    """Inductive energy Phi0^2 / (4 pi^2 L) / h in GHz for ``l`` in pH."""
    l = np.asarray(l, dtype=float)
    if np.any(l <= 0) or not np.all(np.isfinite(l)):
        raise DomainError("inductance must be positive and finite")
    out = PHI0**2 / (4 * np.pi**2 * l * 1e-12) / const.h / 1e9
    return float(out) if out.ndim == 0 else out


def energy_to_inductance(e):
    """Inverse of :func:`inductance_to_energy` (GHz -> pH)."""
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise DomainError("energy must be positive and finite")
    out = PHI0**2 / (4 * np.pi**2 * e * 1e9 * const.h) * 1e12
    return float(out) if out.ndim == 0 else out


def capacitance_to_charging_energy(c):
    """Charging energy e^2 / (4 C) / h in GHz for ``c`` in fF."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise DomainError("capacitance must be positive and finite")
    out = const.e**2 / (4 * c * 1e-15) / const.h / 1e9
    return float(out) if out.ndim == 0 else out


# below this skewness the closed forms lose accuracy to the 1/chi prefactor
SMALL_CHI = 1e-5


def _small_chi_sum(phi, chi, power, trig):
    """First three series terms; the remainder is O(chi^3)."""
    return sum((-chi) ** (k - 1) * trig(k * phi) / k**power for k in (1, 2, 3))


def _check_chi(chi):
    if not (0.0 <= chi <= 1.0):
        raise DomainError(f"chi must lie in [0, 1], got {chi!r}")


def wrap_phase(phi):
    """Map phases into [-pi, pi)."""
    return (np.asarray(phi, dtype=float) + np.pi) % (2 * np.pi) - np.pi


def _check_singular(phi, chi):
    if chi == 1.0:
        # distance to the nearest odd multiple of pi
        dist = np.abs(np.abs(wrap_phase(phi)) - np.pi)
        if np.any(dist < 1e-12):
            raise SingularPointError(
                "the sawtooth CPR (chi = 1) is discontinuous at phi = pi mod 2 pi"
            )


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def cpr_energy(phi, e0, chi):
    """Energy-phase relation of the skewed weak link, in GHz.

    Parameters
    ----------
    phi : float or ndarray
        Phase across the weak link (rad).
    e0 : float
        Characteristic junction energy E0 (GHz).
    chi : float
        Skewness in [0, 1].
    """
    _check_chi(chi)
    phi = np.asarray(phi, dtype=float)
    if chi == 0.0:
        out = -e0 * np.cos(phi)
    elif chi < SMALL_CHI:
        out = -e0 * (1 + chi) * _small_chi_sum(phi, chi, 2, np.cos)
    elif chi == 1.0:
        pw = wrap_phase(phi)
        out = e0 * pw**2 / 2 - e0 * np.pi**2 / 6
    else:
        z = -chi * np.exp(1j * phi)
        # scipy's spence(w) is Li2(1 - w)
        out = e0 * (1 + chi) / chi * spence(1 - z).real
    return _scalar_or_array(out)


def cpr_current(phi, e0, chi):
    """First phase derivative dE/dphi (GHz/rad).

    Raises :class:`SingularPointError` at odd multiples of pi when ``chi == 1``.
    """
    _check_chi(chi)
    phi = np.asarray(phi, dtype=float)
    _check_singular(phi, chi)
    if chi == 0.0:
        out = e0 * np.sin(phi)
    elif chi < SMALL_CHI:
        out = e0 * (1 + chi) * _small_chi_sum(phi, chi, 1, np.sin)
    elif chi == 1.0:
        out = e0 * wrap_phase(phi)
    else:
        # 1 + chi cos(phi) = (1 - chi) + 2 chi cos^2(phi/2), free of cancellation near pi
        h = 2 * np.cos(phi / 2) ** 2
        out = e0 * (1 + chi) / chi * np.arctan2(chi * np.sin(phi), (1 - chi) + chi * h)
    return _scalar_or_array(out)


def cpr_curvature(phi, e0, chi):
    """Second phase derivative d2E/dphi2 (GHz/rad^2)."""
    _check_chi(chi)
    phi = np.asarray(phi, dtype=float)
    _check_singular(phi, chi)
    if chi == 1.0:
        out = np.full_like(phi, float(e0))
    else:
        h = 2 * np.cos(phi / 2) ** 2
        out = e0 * (1 + chi) * (h - (1 - chi)) / ((1 - chi) ** 2 + 2 * chi * h)
    return _scalar_or_array(out)


def cpr_series_tail_bound(chi, n_terms):
    """Upper bound on sum_{k > n_terms} chi^(k-1) / k^2."""
    _check_chi(chi)
    K = n_terms
    if chi == 1.0:
        return 1.0 / K
    return chi**K / ((1 - chi) * (K + 1) ** 2)


@dataclass(frozen=True)
class JJLink:
    """Weak link modelled as a Josephson junction with skewed CPR."""

    e0: float
    chi: float

    def __post_init__(self):
        if not (self.e0 > 0 and np.isfinite(self.e0)):
            raise DomainError("e0 must be positive")
        _check_chi(self.chi)

    kind = "jj"


@dataclass(frozen=True)
class QPSLink:
    """Weak link modelled as a phase-slip element with series inductance."""

    e_q: float
    e_lq: float

    def __post_init__(self):
        if not (self.e_q > 0 and self.e_lq > 0):
            raise DomainError("e_q and e_lq must be positive")

    kind = "qps"


WeakLinkModel = Union[JJLink, QPSLink]


@dataclass(frozen=True)
class CircuitSpec:
    """Energies of the RF-SQUID circuit (all in GHz).

    ``e_c_sigma`` belongs to the heavy common mode and must be smaller than
    ``e_c_delta``.
    """

    e_c_sigma: float
    e_c_delta: float
    e_ls: float
    e_lp: float
    weak_link: WeakLinkModel

    def __post_init__(self):
        for name in ("e_c_sigma", "e_c_delta", "e_ls", "e_lp"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")
        if not self.e_c_sigma < self.e_c_delta:
            raise DomainError("e_c_sigma must be smaller than e_c_delta")
        if not isinstance(self.weak_link, (JJLink, QPSLink)):
            raise DomainError("weak_link must be a JJLink or QPSLink")

    @property
    def is_jj(self):
        return isinstance(self.weak_link, JJLink)

    @property
    def charging(self):
        """Diagonal charging matrix for the (sigma, delta) coordinates."""
        return np.diag([self.e_c_sigma, self.e_c_delta])

    def with_params(self, **values):
        """Return a copy with circuit or weak-link fields replaced."""
        link_fields = {}
        own = {}
        for k, v in values.items():
            if k in ("e0", "chi", "e_q", "e_lq"):
                link_fields[k] = v
            else:
                own[k] = v
        link = replace(self.weak_link, **link_fields) if link_fields else self.weak_link
        return replace(self, weak_link=link, **own)

    def to_dict(self):
        link = asdict(self.weak_link)
        link = {"type": self.weak_link.kind, **link}
        return {
            "e_c_sigma": self.e_c_sigma,
            "e_c_delta": self.e_c_delta,
            "e_ls": self.e_ls,
            "e_lp": self.e_lp,
            "weak_link": link,
        }

    @classmethod
    def from_dict(cls, data, prefix="circuit"):
        """Build from the JSON document layout, raising :class:`ConfigError`."""
        if not isinstance(data, dict):
            raise ConfigError(prefix, "expected an object")
        expected = {"e_c_sigma", "e_c_delta", "e_ls", "e_lp", "weak_link"}
        _check_keys(data, expected, expected, prefix)
        link = data["weak_link"]
        lprefix = f"{prefix}.weak_link"
        if not isinstance(link, dict) or "type" not in link:
            raise ConfigError(lprefix, "expected an object with a 'type' key")
        kind = link["type"]
        if kind == "jj":
            keys = {"type", "e0", "chi"}
            _check_keys(link, keys, keys, lprefix)
            link_obj = _build(JJLink, lprefix, e0=_num(link, "e0", lprefix),
                              chi=_num(link, "chi", lprefix))
        elif kind == "qps":
            keys = {"type", "e_q", "e_lq"}
            _check_keys(link, keys, keys, lprefix)
            link_obj = _build(QPSLink, lprefix, e_q=_num(link, "e_q", lprefix),
                              e_lq=_num(link, "e_lq", lprefix))
        else:
            raise ConfigError(f"{lprefix}.type", f"unknown weak-link type {kind!r}")
        kwargs = {k: _num(data, k, prefix) for k in ("e_c_sigma", "e_c_delta", "e_ls", "e_lp")}
        return _build(cls, prefix, weak_link=link_obj, **kwargs)


@dataclass(frozen=True)
class PhysicalElements:
    """Lumped element values: capacitances in fF, inductances in pH."""

    c_b: float
    c_s: float
    l_p: float
    l_s: float
    l_q: float | None = None

    def __post_init__(self):
        for name in ("c_b", "c_s", "l_p", "l_s", "l_q"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive")

    def energies(self):
        """Circuit energies (GHz) keyed like :class:`CircuitSpec` fields."""
        out = {
            "e_c_sigma": capacitance_to_charging_energy(self.c_s + 2 * self.c_b),
            "e_c_delta": capacitance_to_charging_energy(self.c_s),
            "e_ls": inductance_to_energy(self.l_s),
            "e_lp": inductance_to_energy(self.l_p),
        }
        if self.l_q is not None:
            out["e_lq"] = inductance_to_energy(self.l_q)
        return out


def _check_keys(data, allowed, required, prefix):
    for k in data:
        if k not in allowed:
            raise ConfigError(f"{prefix}.{k}", "unknown key")
    for k in required:
        if k not in data:
            raise ConfigError(f"{prefix}.{k}", "missing required key")


def _num(data, key, prefix):
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{prefix}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _build(cls, prefix, **kwargs):
    try:
        return cls(**kwargs)
    except DomainError as exc:
        msg = str(exc)
        key = next((k for k in kwargs if msg.startswith(k)), None)
        raise ConfigError(f"{prefix}.{key}" if key else prefix, msg) from exc

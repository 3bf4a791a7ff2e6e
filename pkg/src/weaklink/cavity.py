"""Three-mode hybridization of the SQUID mode with two cavity modes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class CavityParams:
    """Cavity mode frequencies and their couplings to the SQUID mode (GHz).

    With ``tie_g_b`` set, ``g_b`` is ignored and replaced by
    ``sqrt(f_b / f_a) * g_a``.
    """

    f_a: float
    f_b: float
    g_a: float
    g_b: float = 0.0
    tie_g_b: bool = False

    def __post_init__(self):
        if not (self.f_a > 0 and self.f_b > 0):
            raise DomainError("f_a and f_b must be positive")
        if not self.f_a < self.f_b:
            raise DomainError("f_a must be below f_b")
        if self.g_a < 0 or self.g_b < 0:
            raise DomainError("g_a and g_b must be non-negative")

    @property
    def coupling_b(self):
        return float(np.sqrt(self.f_b / self.f_a) * self.g_a) if self.tie_g_b else self.g_b

    def to_dict(self):
        return {"f_a": self.f_a, "f_b": self.f_b, "g_a": self.g_a, "g_b": self.g_b,
                "tie_g_b": self.tie_g_b}


def coupling_matrix(f_q, cav):
    """Single-excitation Hamiltonian in the (SQUID, a, b) basis."""
    g_b = cav.coupling_b
    return np.array([[f_q, cav.g_a, g_b], [cav.g_a, cav.f_a, 0.0], [g_b, 0.0, cav.f_b]])


def hybridize(f_q, cav):
    """Dressed frequencies, ascending, for scalar or array ``f_q``.

    Returns an array of shape ``(..., 3)``; NaN inputs give NaN rows.
    """
    f_q = np.asarray(f_q, dtype=float)
    bad = ~np.isfinite(f_q)
    if bad.any():
        out = np.full(f_q.shape + (3,), np.nan)
        out[~bad] = hybridize(f_q[~bad], cav)
        return out
    if np.any(f_q <= 0):
        raise DomainError("f_q must be positive")
    g_b = cav.coupling_b
    h = np.zeros(f_q.shape + (3, 3))
    h[..., 0, 0] = f_q
    h[..., 1, 1] = cav.f_a
    h[..., 2, 2] = cav.f_b
    h[..., 0, 1] = h[..., 1, 0] = cav.g_a
    h[..., 0, 2] = h[..., 2, 0] = g_b
    return np.linalg.eigvalsh(h)


def dressed_branch(curve, cav, branch=0):
    """Copy of ``curve`` with ``f_hybridized`` set to the chosen dressed branch."""
    return curve.with_hybridized(hybridize(curve.f_bare, cav)[:, branch])

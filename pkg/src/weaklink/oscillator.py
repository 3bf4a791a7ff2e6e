"""Harmonic-oscillator matrix elements.

Displacement-operator elements

    <m| D(beta) |n> = sqrt(n!/m!) beta^(m-n) exp(-beta^2/2) L_n^(m-n)(beta^2),   m >= n

are generated along each diagonal m - n = const with the normalised
three-term Laguerre recurrence.  Each diagonal carries its own logarithmic
scale, so elements whose magnitude is far below the double-precision range
(large displacements, high levels) are still available as logarithms.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

_RESCALE = 1e150


def displacement_matrix_log(beta, n_rows, n_cols=None):
    """Sign and log-magnitude of ``<m|D(beta)|n>`` for real ``beta``.

    ``beta`` may be a scalar or a 1-D array; an array adds a leading axis
    to both outputs.

    Returns
    -------
    sign, logabs : ndarray, shape (n_rows, n_cols) or (len(beta), n_rows, n_cols)
        ``sign * exp(logabs)`` is the matrix element; zeros have
        ``logabs = -inf``.
    """
    scalar = np.ndim(beta) == 0
    beta = np.atleast_1d(np.asarray(beta, dtype=float))[:, None]
    n_cols = n_rows if n_cols is None else n_cols
    nb = beta.shape[0]
    sign = np.zeros((nb, n_rows, n_cols))
    logabs = np.full((nb, n_rows, n_cols), -np.inf)
    x = beta * beta
    with np.errstate(divide="ignore"):
        lb = np.log(np.abs(beta))

    for lower in (True, False):
        # lower: element (s + a, s); upper: element (s, s + a) with a >= 1
        span = n_rows if lower else n_cols
        other = n_cols if lower else n_rows
        alpha = np.arange(0 if lower else 1, span)
        if alpha.size == 0:
            continue
        with np.errstate(invalid="ignore"):
            log0 = np.where(alpha > 0, alpha * lb, 0.0) - x / 2 - 0.5 * gammaln(alpha + 1)
        s_beta = np.sign(beta) if lower else -np.sign(beta)
        parity = np.where((alpha % 2 == 1) & (beta != 0.0), s_beta, 1.0)
        scale = log0.copy()
        prev = np.zeros((nb, alpha.size))
        cur = np.ones((nb, alpha.size))
        for s in range(min(other, span)):
            ok = alpha + s < span
            if not ok.any():
                break
            a = alpha[ok]
            mant = cur[:, ok]
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(mant)) + scale[:, ok]
            sg = np.sign(mant) * parity[:, ok]
            if lower:
                sign[:, a + s, s] = sg
                logabs[:, a + s, s] = la
            else:
                sign[:, s, a + s] = sg
                logabs[:, s, a + s] = la
            nxt = ((2 * s + 1 + alpha - x) * cur - np.sqrt(s * (s + alpha)) * prev) / np.sqrt(
                (s + 1) * (s + 1 + alpha)
            )
            prev, cur = cur, nxt
            big = np.abs(cur) > _RESCALE
            if big.any():
                f = np.where(big, np.abs(cur), 1.0)
                cur = cur / f
                prev = prev / f
                scale = scale + np.log(f)
    if scalar:
        return sign[0], logabs[0]
    return sign, logabs


def displacement_matrix(beta, n_rows, n_cols=None):
    """Matrix (or stack, for array ``beta``) of ``<m|D(beta)|n>``, underflowing to zero."""
    sign, logabs = displacement_matrix_log(beta, n_rows, n_cols)
    with np.errstate(under="ignore"):
        return sign * np.exp(np.clip(logabs, -1e300, 700))


def _check_level(n, name):
    if int(n) != n or n < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {n!r}")
    return int(n)


def displaced_overlap(n, m, d):
    """Overlap of oscillator state ``n`` displaced by ``d`` with state ``m``.

    ``d`` is measured in oscillator lengths, so the ground-state overlap is
    ``exp(-d^2/4)``.  The convention is ``<m| D(d / sqrt 2) |n>``, which makes
    ``displaced_overlap(n, m, d) == displaced_overlap(m, n, -d)`` exactly.
    """
    n = _check_level(n, "n")
    m = _check_level(m, "m")
    sign, logabs = displacement_matrix_log(d / np.sqrt(2), m + 1, n + 1)
    with np.errstate(under="ignore"):
        return float(sign[m, n] * np.exp(logabs[m, n]))


def overlap_column_log(n, m_max, d):
    """Sign and log-magnitude of ``displaced_overlap(n, m, d)`` for m = 0..m_max."""
    n = _check_level(n, "n")
    sign, logabs = displacement_matrix_log(d / np.sqrt(2), m_max + 1, n + 1)
    return sign[:, n], logabs[:, n]


def overlap_column(n, m_max, d):
    sign, logabs = overlap_column_log(n, m_max, d)
    with np.errstate(under="ignore"):
        return sign * np.exp(logabs)


def ladder_squares(dim):
    """Galerkin matrices of ``(a + a^dag)^2`` and ``-(a^dag - a)^2``.

    Both are exact projections onto the first ``dim`` number states (not
    products of truncated ladder operators).
    """
    n = np.arange(dim, dtype=float)
    off = np.sqrt((n[:-2] + 1) * (n[:-2] + 2))
    x2 = np.diag(2 * n + 1) + np.diag(off, 2) + np.diag(off, -2)
    p2 = np.diag(2 * n + 1) - np.diag(off, 2) - np.diag(off, -2)
    return x2, p2

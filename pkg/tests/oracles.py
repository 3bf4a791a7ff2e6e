"""Reference computations that share no code with the package."""
import math

import numpy as np
from scipy import integrate


def series_terms(chi, rel_tol=1e-13, power=2):
    """Number of terms after which the series tail is below ``rel_tol``.

    The tail of ``sum chi^(k-1) / k^power`` beyond ``K`` is bounded by
    ``chi^K / ((1 - chi) K^power)``.
    """
    if chi == 0:
        return 1
    k = 16
    while chi**k / ((1 - chi) * k**power) > rel_tol:
        k *= 2
    return k


PHASE_BITS = 20


def dyadic_phases(rng, n, bits=PHASE_BITS):
    """Random phases ``2 pi j / 2^bits`` in (-pi, pi), returned with their numerators."""
    half = 1 << (bits - 1)
    j = rng.integers(-half + 1, half, n)
    return 2 * np.pi * j / (1 << bits), j


def cpr_series(j, e0, chi, bits=PHASE_BITS, chunk=1 << 13):
    """Truncated skewed energy-phase series and its term-wise derivatives.

    The phases are ``2 pi j / 2^bits`` for integer ``j``, so every
    ``k * phi`` is reduced modulo 2 pi exactly in integer arithmetic and
    the trigonometric values come from a table.  Returns energy, current
    and curvature, summed until the tail bound of the slowest (curvature)
    series is below ``1e-13``.
    """
    j = np.atleast_1d(np.asarray(j, np.int64))
    size = 1 << bits
    table = 2 * np.pi * np.arange(size) / size
    cos_t, sin_t = np.cos(table), np.sin(table)
    n = series_terms(chi, power=0)
    energy = np.zeros(j.size)
    current = np.zeros(j.size)
    curvature = np.zeros(j.size)
    for a in range(0, n, chunk):
        k = np.arange(a + 1, min(a + chunk, n) + 1, dtype=np.int64)
        idx = np.outer(k, j) % size
        kf = k.astype(float)
        w = (-chi) ** (kf - 1)
        c, s = cos_t[idx], sin_t[idx]
        energy += (w / kf**2) @ c
        current += (w / kf) @ s
        curvature += w @ c
    scale = e0 * (1 + chi)
    return -scale * energy, scale * current, scale * curvature


def cesaro_current(phi, e0, n_terms=200_000):
    """Fejer (Cesaro) mean of the chi = 1 current series."""
    k = np.arange(1, n_terms + 1, dtype=float)
    weights = 1 - k / (n_terms + 1)
    return 2 * e0 * float(np.sum(weights * (-1) ** (k - 1) * np.sin(k * phi) / k))


def hermite_functions(n_max, x):
    """Normalised Hermite functions psi_0..psi_n_max at ``x`` by recurrence."""
    x = np.asarray(x, float)
    out = np.zeros((n_max + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-x * x / 2)
    if n_max >= 1:
        out[1] = math.sqrt(2) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_function(n, x):
    return hermite_functions(n, x)[n]


def hermite_derivative(n, x):
    psi = hermite_functions(n + 1, x)
    below = psi[n - 1] if n > 0 else 0.0
    return math.sqrt(n / 2) * below - math.sqrt((n + 1) / 2) * psi[n + 1]


def overlap_quadrature(n, m, d):
    """Integral of psi_m(x) psi_n(x - d) over the real line."""
    lo, hi = min(0.0, d) - 14, max(0.0, d) + 14
    val, _ = integrate.quad(lambda x: hermite_function(m, x) * hermite_function(n, x - d), lo, hi,
                            epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def cubic_roots(f_q, f_a, f_b, g_a, g_b):
    """Roots of det(lambda - H) for the three-mode coupling matrix, ascending."""
    # (l - q)(l - a)(l - b) - g_a^2 (l - b) - g_b^2 (l - a)
    p = np.polymul(np.polymul([1, -f_q], [1, -f_a]), [1, -f_b])
    p = np.polysub(p, np.polymul([g_a**2], [1, -f_b]))
    p = np.polysub(p, np.polymul([g_b**2], [1, -f_a]))
    roots = np.sort(np.roots(p).real)
    # polish with Newton on the polynomial
    dp = np.polyder(p)
    for _ in range(5):
        roots = roots - np.polyval(p, roots) / np.polyval(dp, roots)
    return roots


def piecewise_parabola_minimum(e_ls, e_lp, e0, flux, n):
    """Minimum of well ``n`` in the chi = 1 limit by solving the linear stationarity system."""
    a = 2 * np.pi * flux
    # V = e_ls/2 (s+d)^2 + e_lp/2 (s-d-a)^2 + e0/2 (d-s+2 pi n)^2 - e0 pi^2/6
    h = np.array([[e_ls + e_lp + e0, e_ls - e_lp - e0], [e_ls - e_lp - e0, e_ls + e_lp + e0]])
    b = np.array([e_lp * a + e0 * 2 * np.pi * n, -e_lp * a - e0 * 2 * np.pi * n])
    x = np.linalg.solve(h, b)
    s, d = x
    v = (0.5 * e_ls * (s + d) ** 2 + 0.5 * e_lp * (s - d - a) ** 2
         + 0.5 * e0 * (d - s + 2 * np.pi * n) ** 2 - e0 * np.pi**2 / 6)
    return x, v


def piecewise_parabola_barrier(e_lp, e0, flux, n):
    """Barrier from well ``n`` to well ``n + 1`` at chi = 1, on the cusp w = (2n + 1) pi."""
    a = 2 * np.pi * flux
    w_star = (e_lp * a + e0 * 2 * np.pi * n) / (e_lp + e0)
    v_min = 0.5 * e_lp * (w_star - a) ** 2 + 0.5 * e0 * (w_star - 2 * np.pi * n) ** 2
    w_cusp = (2 * n + 1) * np.pi
    v_cusp = 0.5 * e_lp * (w_cusp - a) ** 2 + 0.5 * e0 * np.pi**2
    return v_cusp - v_min


def phase_slip_matrix_quadrature(e_c, e_l, e_lq, e_q, flux, dim, sectors):
    """Phase-slip Hamiltonian in displaced Hermite functions, every element by quadrature."""
    k = e_l + e_lq
    length = (8 * e_c / k) ** 0.25
    centres = [2 * np.pi * (e_l * flux + e_lq * m) / k for m in sectors]
    x = np.linspace(-40, 40, 40001)
    basis, deriv = [], []
    for c in centres:
        u = (x - c) / length
        psi = hermite_functions(dim, u)
        basis.append(psi[:dim] / np.sqrt(length))
        dpsi = np.array([hermite_derivative(n, u) for n in range(dim)])
        deriv.append(dpsi / length**1.5)
    size = dim * len(sectors)
    h = np.zeros((size, size))
    for i, m in enumerate(sectors):
        pot = 0.5 * e_l * (x - 2 * np.pi * flux) ** 2 + 0.5 * e_lq * (x - 2 * np.pi * m) ** 2
        blk = slice(i * dim, (i + 1) * dim)
        kin = integrate.simpson(deriv[i][:, None, :] * deriv[i][None, :, :], x=x, axis=-1)
        v = integrate.simpson(basis[i][:, None, :] * pot * basis[i][None, :, :], x=x, axis=-1)
        h[blk, blk] = 4 * e_c * kin + v
        if i + 1 < len(sectors):
            nxt = slice((i + 1) * dim, (i + 2) * dim)
            ov = integrate.simpson(basis[i + 1][:, None, :] * basis[i][None, :, :], x=x, axis=-1)
            h[nxt, blk] = -0.5 * e_q * ov
            h[blk, nxt] = -0.5 * e_q * ov.T
    return h

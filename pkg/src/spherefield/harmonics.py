"""Special functions for analysis on the unit d-sphere.

Conventions used throughout the package:

* ``S^d`` is the unit sphere embedded in ``R^{d+1}``; points are unit
  vectors (Euclidean norm 1 within ``UNIT_NORM_TOL``).
* The Gegenbauer order tied to dimension ``d`` is ``lam = (d - 1) / 2``.
* ``d = 1`` is degenerate for Gegenbauer polynomials (``lam = 0``); we use
  the Chebyshev limit ``C_l^0(t) := cos(l * arccos t)`` together with
  eigenspace dimensions ``h(0) = 1``, ``h(l) = 2`` for ``l >= 1``, which is
  the Fourier structure of the circle and keeps the addition identity
  intact.
* Real spherical harmonics are orthonormal with respect to the (unnormalized)
  surface measure: ``int Y_{l,m} Y_{l,m'} dsigma = delta_{mm'}``.  Under this
  normalization the addition identity reads

      sum_m Y_{l,m}(x) Y_{l,m}(y) = addition_constant(d, l) * C_l^lam(x . y)

  with ``addition_constant(d, l) = h(l) / (omega_d * C_l^lam(1))``.

Within a degree ``l`` the real harmonics are ordered (1-based index ``m``):

* ``d = 1``: ``m = 1 -> cos(l phi)/sqrt(pi)``, ``m = 2 -> sin(l phi)/sqrt(pi)``
  (degree 0 has the single constant ``1/sqrt(2 pi)``).
* ``d = 2``: ``m = 1`` is the zonal harmonic (azimuthal order 0); for
  azimuthal order ``k >= 1``, ``m = 2k`` is the cosine harmonic and
  ``m = 2k + 1`` the sine harmonic.
"""

from __future__ import annotations

import math

import numpy as np

UNIT_NORM_TOL = 1e-12

# |t| may exceed 1 by at most this much (dot products of unit vectors carry
# rounding dust); larger excursions are rejected.
_T_CLAMP = 1e-12


def gegenbauer_order(d: int) -> float:
    """Gegenbauer order ``lam = (d - 1) / 2`` for the sphere ``S^d``."""
    if d < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {d}")
    return (d - 1) / 2.0


def h_dim(d: int, l: int) -> int:
    """Dimension of the degree-``l`` spherical-harmonic eigenspace on S^d.

    Computed as ``(2l + d - 1) (l + d - 2)! / (l! (d - 1)!)`` in exact
    integer arithmetic (Python integers do not overflow).  For ``d = 1`` the
    circle convention ``h(0) = 1``, ``h(l) = 2`` applies.
    """
    if d < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {d}")
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    if l == 0:
        return 1
    if d == 1:
        return 2
    # (l + d - 2)! / (l! (d - 2)!) = binom(l + d - 2, l), exact.
    return (2 * l + d - 1) * math.comb(l + d - 2, l) // (d - 1)


def surface_measure(d: int) -> float:
    """Total surface measure ``omega_d = 2 pi^{(d+1)/2} / Gamma((d+1)/2)``."""
    if d < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {d}")
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + _T_CLAMP):
        raise ValueError("argument t must lie in [-1, 1] (within 1e-12)")
    return np.clip(t, -1.0, 1.0)


def gegenbauer_all(lam: float, l_max: int, t) -> np.ndarray:
    """Evaluate ``C_l^lam(t)`` for all degrees ``l = 0 .. l_max`` at once.

    Uses the ascending three-term recurrence

        l C_l = 2 (l + lam - 1) t C_{l-1} - (l + 2 lam - 2) C_{l-2},

    which is forward-stable on [-1, 1].  For ``lam = 0`` returns the
    Chebyshev limit ``cos(l * arccos t)``.

    Returns an array of shape ``(l_max + 1,) + shape(t)``.
    """
    if lam < 0:
        raise ValueError(f"Gegenbauer order must be >= 0, got {lam}")
    if l_max < 0:
        raise ValueError(f"degree must be >= 0, got {l_max}")
    t = _check_t(t)
    out = np.empty((l_max + 1,) + t.shape, dtype=float)
    if lam == 0.0:
        theta = np.arccos(t)
        for l in range(l_max + 1):
            out[l] = np.cos(l * theta)
        return out
    out[0] = 1.0
    if l_max >= 1:
        out[1] = 2.0 * lam * t
    for l in range(2, l_max + 1):
        out[l] = (2.0 * (l + lam - 1.0) * t * out[l - 1]
                  - (l + 2.0 * lam - 2.0) * out[l - 2]) / l
    return out


def gegenbauer(lam: float, l: int, t):
    """Gegenbauer polynomial ``C_l^lam(t)`` (Chebyshev limit at ``lam = 0``)."""
    vals = gegenbauer_all(lam, l, t)
    return vals[l] if np.ndim(t) else float(vals[l])


def gegenbauer_at_one(lam: float, l: int) -> float:
    """Normalization value ``C_l^lam(1) = binom(l + 2 lam - 1, l)``.

    Evaluated in log-Gamma space so large degrees neither overflow nor lose
    the leading digits to factorial cancellation.  The Chebyshev limit gives
    1 for every degree.
    """
    if lam < 0:
        raise ValueError(f"Gegenbauer order must be >= 0, got {lam}")
    if l < 0:
        raise ValueError(f"degree must be >= 0, got {l}")
    if lam == 0.0 or l == 0:
        return 1.0
    two_lam = 2.0 * lam
    if two_lam == int(two_lam) and two_lam <= 64:
        return float(math.comb(l + int(two_lam) - 1, l))
    return math.exp(math.lgamma(l + 2.0 * lam) - math.lgamma(l + 1.0)
                    - math.lgamma(2.0 * lam))


def gegenbauer_at_one_all(lam: float, l_max: int) -> np.ndarray:
    """``C_l^lam(1)`` for ``l = 0 .. l_max``."""
    return np.array([gegenbauer_at_one(lam, l) for l in range(l_max + 1)])


def addition_constant(d: int, l: int) -> float:
    """Proportionality constant ``h(l) / (omega_d C_l^lam(1))`` in the
    addition identity for orthonormal real harmonics."""
    lam = gegenbauer_order(d)
    return h_dim(d, l) / (surface_measure(d) * gegenbauer_at_one(lam, l))


def check_points(d: int, points) -> np.ndarray:
    """Validate an ``(n, d+1)`` array of unit vectors on S^d."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != d + 1:
        raise ValueError(
            f"points on S^{d} must have {d + 1} coordinates, got {pts.shape[1]}")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(
            f"points must be unit vectors within {UNIT_NORM_TOL:g} "
            f"(worst deviation {worst:.3e})")
    return pts


def _require_synthesis_dim(d: int) -> None:
    if d not in (1, 2):
        raise ValueError(
            f"real harmonic evaluation (and field synthesis) is implemented "
            f"for d in {{1, 2}} only; got d = {d}.  Coefficient and "
            f"equivalence calculus remain available for general d.")


def harmonic_count(d: int, l_max: int) -> int:
    """Total number of harmonics of degree <= l_max."""
    return sum(h_dim(d, l) for l in range(l_max + 1))


def degree_slices(d: int, l_max: int) -> list[slice]:
    """Column slices of :func:`harmonic_basis` per degree ``l = 0 .. l_max``."""
    slices = []
    off = 0
    for l in range(l_max + 1):
        h = h_dim(d, l)
        slices.append(slice(off, off + h))
        off += h
    return slices


def harmonic_basis(d: int, l_max: int, points) -> np.ndarray:
    """Evaluate all orthonormal real harmonics of degree <= l_max.

    Parameters
    ----------
    d : sphere dimension, 1 or 2.
    l_max : maximum degree.
    points : array (n, d+1) of unit vectors.

    Returns
    -------
    array (n, harmonic_count(d, l_max)), columns ordered degree-major with
    the within-degree ordering documented in the module docstring.
    """
    _require_synthesis_dim(d)
    pts = check_points(d, points)
    n = pts.shape[0]
    out = np.empty((n, harmonic_count(d, l_max)), dtype=float)
    if d == 1:
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        out[:, 0] = 1.0 / math.sqrt(2.0 * math.pi)
        inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
        off = 1
        for l in range(1, l_max + 1):
            out[:, off] = np.cos(l * phi) * inv_sqrt_pi
            out[:, off + 1] = np.sin(l * phi) * inv_sqrt_pi
            off += 2
        return out

    # d == 2: fully normalized associated Legendre values via the stable
    # sectoral recurrence (m-diagonal) followed by ascent in l, with the
    # normalization carried inside the recurrence so no factorials overflow.
    u = pts[:, 2]
    s = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    offsets = [l * l for l in range(l_max + 1)]  # degree-major layout

    cos_m = {m: np.cos(m * phi) for m in range(1, l_max + 1)}
    sin_m = {m: np.sin(m * phi) for m in range(1, l_max + 1)}
    sqrt2 = math.sqrt(2.0)

    def store(l, m, pbar):
        base = offsets[l]
        if m == 0:
            out[:, base] = pbar
        else:
            out[:, base + 2 * m - 1] = sqrt2 * pbar * cos_m[m]
            out[:, base + 2 * m] = sqrt2 * pbar * sin_m[m]

    pmm = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(l_max + 1):
        if m > 0:
            pmm = -math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        store(m, m, pmm)
        if m + 1 <= l_max:
            p_prev2 = pmm
            p_prev1 = math.sqrt(2.0 * m + 3.0) * u * pmm
            store(m + 1, m, p_prev1)
            for l in range(m + 2, l_max + 1):
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m)
                              / ((2.0 * l - 3.0) * (l * l - m * m)))
                p = a * u * p_prev1 - b * p_prev2
                store(l, m, p)
                p_prev2, p_prev1 = p_prev1, p
    return out


def harmonic_degree_block(d: int, l: int, points) -> np.ndarray:
    """Values of the ``h(l)`` degree-``l`` harmonics at the given points."""
    basis = harmonic_basis(d, l, points)
    return basis[:, degree_slices(d, l)[l]]


def real_harmonic(d: int, l: int, m: int, x) -> float:
    """Real orthonormal spherical harmonic ``Y_{l,m}(x)``, ``1 <= m <= h(l)``."""
    _require_synthesis_dim(d)
    if not 1 <= m <= h_dim(d, l):
        raise ValueError(f"harmonic index m={m} outside [1, h({l})={h_dim(d, l)}]")
    block = harmonic_degree_block(d, l, np.asarray(x, dtype=float)[None, :])
    return float(block[0, m - 1])


def zonal_sum(d: int, l: int, x, y) -> float:
    """Degree-l zonal sum ``sum_m Y_{l,m}(x) Y_{l,m}(y)``.

    Equals ``addition_constant(d, l) * C_l^lam(x . y)`` (tested property).
    """
    _require_synthesis_dim(d)
    pts = check_points(d, np.stack([np.asarray(x, float), np.asarray(y, float)]))
    block = harmonic_degree_block(d, l, pts)
    return float(np.dot(block[0], block[1]))


def sphere_quadrature(d: int, max_degree: int):
    """Quadrature on S^d exact for harmonic products up to ``max_degree``.

    ``d = 2``: Gauss-Legendre nodes in the polar cosine crossed with a uniform
    trapezoid rule in azimuth; ``d = 1``: uniform trapezoid on the circle.
    Orders are chosen so polynomial integrands of total degree ``max_degree``
    integrate exactly, which makes the orthonormality tests sharp.

    Returns ``(points, weights)`` with ``points`` of shape ``(n, d+1)`` and
    ``sum(weights) = omega_d``.
    """
    _require_synthesis_dim(d)
    if d == 1:
        n = max_degree + 2
        phi = 2.0 * math.pi * np.arange(n) / n
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        w = np.full(n, 2.0 * math.pi / n)
        return pts, w
    n_polar = max_degree // 2 + 2
    n_az = max_degree + 2
    u, w_u = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * math.pi * np.arange(n_az) / n_az
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    ss = np.sqrt(np.clip(1.0 - uu ** 2, 0.0, None))
    pts = np.column_stack([
        (ss * np.cos(pp)).ravel(),
        (ss * np.sin(pp)).ravel(),
        uu.ravel(),
    ])
    # renormalize rounding dust so check_points accepts the nodes
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    w = np.repeat(w_u * (2.0 * math.pi / n_az), n_az)
    return pts, w

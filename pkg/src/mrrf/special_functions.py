"""Special functions in the phase conventions used throughout the package.

Conventions
-----------
* Spherical harmonics carry the Condon-Shortley phase and are orthonormal
  on the unit sphere.
* ``d^l_{m m'}(beta) = <l m| exp(-i beta J_y) |l m'>`` so that
  ``d^1_{00} = cos(beta)`` and ``d^1_{10} = -sin(beta)/sqrt(2)``.
* Clebsch-Gordan coefficients follow Condon-Shortley.

Complex rotation angles ``i tau(x)`` are handled through their half-angle
cosine and sine, continued analytically from real angles so that
``sin(i tau) = 2 sin(i tau/2) cos(i tau/2) = -i x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = [
    "AngularIndex",
    "ComplexRotationAngle",
    "clebsch_gordan",
    "wigner_3j",
    "threej_even_table",
    "jacobi_p",
    "wigner_d_real",
    "wigner_d_complex",
    "wigner_d_halfangle",
    "wigner_d_complex_table",
    "wigner_d_complex_column",
    "wigner_d_real_table",
    "modified_spherical_bessel_k",
    "log_bessel_k_table",
    "assoc_legendre",
    "spherical_harmonic",
    "normalized_legendre",
    "half_range_overlap",
    "half_range_matrix",
    "lm_index",
]


def lm_index(l: int, m: int) -> int:
    """Flat position of ``(l, m)`` in an array ordered by ``l`` then ``m``."""
    return l * l + l + m


@dataclass(frozen=True)
class AngularIndex:
    """Degree/order pair with ``|m| <= l``."""

    l: int
    m: int

    def __post_init__(self):
        if self.l < 0 or abs(self.m) > self.l:
            raise ValueError(f"invalid angular index (l={self.l}, m={self.m})")

    @property
    def flat(self) -> int:
        return lm_index(self.l, self.m)


@dataclass(frozen=True)
class ComplexRotationAngle:
    """The imaginary rotation angle ``i tau(x)`` with ``x >= 0``.

    ``cos(i tau) = sqrt(1 + x^2)`` and ``sin(i tau) = -i x``.
    """

    x: float

    def __post_init__(self):
        if not np.isfinite(self.x) or self.x < 0:
            raise ValueError(f"complex rotation argument must be >= 0, got {self.x}")

    @property
    def cos_val(self) -> float:
        return math.sqrt(1.0 + self.x * self.x)

    @property
    def sin_val(self) -> complex:
        return -1j * self.x

    @property
    def cos_half(self) -> float:
        return math.sqrt(0.5 * (1.0 + self.cos_val))

    @property
    def sin_half(self) -> complex:
        # (c - 1)/2 written to avoid cancellation at small x
        return -1j * math.sqrt(0.5 * self.x * self.x / (self.cos_val + 1.0))


def _check_lm(l, m, name="m"):
    if l < 0:
        raise ValueError(f"degree must be non-negative, got {l}")
    if abs(m) > l:
        raise ValueError(f"|{name}|={abs(m)} exceeds degree {l}")


# ---------------------------------------------------------------------------
# Clebsch-Gordan coefficients


@lru_cache(maxsize=200_000)
def _cg_exact(j1, m1, j2, m2, j3, m3):
    f = math.factorial
    kmin = max(0, j2 - j3 - m1, j1 - j3 + m2)
    kmax = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (f(k) * f(j1 + j2 - j3 - k) * f(j1 - m1 - k) * f(j2 + m2 - k)
               * f(j3 - j2 + m1 + k) * f(j3 - j1 - m2 + k))
        s += Fraction((-1) ** k, den)
    if s == 0:
        return 0.0
    num = ((2 * j3 + 1) * f(j1 + j2 - j3) * f(j1 - j2 + j3) * f(-j1 + j2 + j3)
           * f(j1 + m1) * f(j1 - m1) * f(j2 + m2) * f(j2 - m2) * f(j3 + m3) * f(j3 - m3))
    sq = Fraction(num, f(j1 + j2 + j3 + 1)) * s * s
    return math.copysign(math.sqrt(float(sq)), s)


def clebsch_gordan(j1: int, m1: int, j2: int, m2: int, j3: int, m3: int) -> float:
    """Clebsch-Gordan coefficient ``C^{j3 m3}_{j1 m1 j2 m2}`` (integer spins).

    Evaluated with the Racah sum in exact rational arithmetic, so the result
    is correctly rounded for any size of the arguments.

    Returns 0 when ``m3 != m1 + m2`` or the triangle rule fails.
    """
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        _check_lm(j, m)
    if m3 != m1 + m2 or j3 < abs(j1 - j2) or j3 > j1 + j2:
        return 0.0
    return _cg_exact(int(j1), int(m1), int(j2), int(m2), int(j3), int(m3))


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol from the exact Clebsch-Gordan coefficient."""
    if m1 + m2 + m3 != 0:
        return 0.0
    cg = clebsch_gordan(j1, m1, j2, m2, j3, -m3)
    return (-1) ** ((j1 - j2 - m3) % 2) * cg / math.sqrt(2 * j3 + 1)


def _threej_000(a, b, c):
    """``(a b c; 0 0 0)`` for even ``a+b+c``; closed product form."""
    J = a + b + c
    g = J // 2
    lg = math.lgamma
    val = 0.5 * (lg(J - 2 * a + 1) + lg(J - 2 * b + 1) + lg(J - 2 * c + 1) - lg(J + 2))
    val += lg(g + 1) - lg(g - a + 1) - lg(g - b + 1) - lg(g - c + 1)
    return (-1) ** (g % 2) * math.exp(val)


@lru_cache(maxsize=16)
def threej_even_table(amax: int, bmax: int, cmax: int) -> np.ndarray:
    """Table of ``(a b c; mu -mu 0)`` for even ``a + b + c``.

    Returns an array ``T[mu, a, b, c]`` for ``0 <= mu <= min(amax, bmax)``;
    entries with odd ``a + b + c`` or a broken triangle rule are zero. The
    symbol is even in ``mu`` for the even-sum family.

    The values come from the Gaunt integral of three spherical harmonics,
    evaluated exactly by Gauss-Legendre quadrature of normalized Legendre
    functions, divided by the closed-form ``(a b c; 0 0 0)``. This avoids the
    cancellation that ruins the floating-point Racah sum at large degree.
    """
    mumax = min(amax, bmax)
    nodes = (amax + bmax + cmax) // 2 + 2
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = np.arccos(x)
    lmax = max(amax, bmax, cmax)
    # P[l, m, node]; negative orders are not needed
    P = special.sph_legendre_p_all(lmax, mumax, theta)[0][:, : mumax + 1, :]
    Pc = P[: cmax + 1, 0, :] * w
    out = np.zeros((mumax + 1, amax + 1, bmax + 1, cmax + 1))
    a_ = np.arange(amax + 1)[:, None, None]
    b_ = np.arange(bmax + 1)[None, :, None]
    c_ = np.arange(cmax + 1)[None, None, :]
    valid = ((a_ + b_ + c_) % 2 == 0) & (c_ >= abs(a_ - b_)) & (c_ <= a_ + b_)
    norm = np.zeros(valid.shape)
    for a, b, c in zip(*np.nonzero(valid)):
        norm[a, b, c] = (math.sqrt((2 * a + 1) * (2 * b + 1) * (2 * c + 1) / (4 * math.pi))
                         * _threej_000(int(a), int(b), int(c)))
    safe = np.where(valid, norm, 1.0)
    for mu in range(mumax + 1):
        Pa = P[: amax + 1, mu, :]
        Pb = P[: bmax + 1, mu, :]
        gaunt = 2 * math.pi * (-1) ** mu * np.einsum("an,bn,cn->abc", Pa, Pb, Pc, optimize=True)
        out[mu] = np.where(valid, gaunt / safe, 0.0)
        out[mu, :mu, :, :] = 0.0
        out[mu, :, :mu, :] = 0.0
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Wigner d-functions


def jacobi_p(n: int, a: int, b: int, x):
    """Jacobi polynomial ``P_n^{(a,b)}(x)`` by the three-term recurrence.

    Works for real or complex ``x`` of any shape, including ``x > 1``.
    """
    x = np.asarray(x)
    p0 = np.ones_like(x, dtype=np.result_type(x, float))
    if n == 0:
        return p0
    p1 = (a + 1) + 0.5 * (a + b + 2) * (x - 1)
    for k in range(2, n + 1):
        s = 2 * k + a + b
        c1 = 2 * k * (k + a + b) * (s - 2)
        c2 = (s - 1) * (s * (s - 2) * x + a * a - b * b)
        c3 = 2 * (k + a - 1) * (k + b - 1) * s
        p0, p1 = p1, (c2 * p1 - c3 * p0) / c1
    return p1


def _d_params(l, m, mp):
    a = abs(m - mp)
    b = abs(m + mp)
    k = l - max(abs(m), abs(mp))
    lz = 0.5 * (math.lgamma(k + 1) + math.lgamma(k + a + b + 1)
                - math.lgamma(k + a + 1) - math.lgamma(k + b + 1))
    sign = (-1) ** ((m - mp) % 2) if m > mp else 1
    return a, b, k, sign * math.exp(lz)


def wigner_d_halfangle(l: int, m: int, mp: int, cos_half, sin_half, cos_full=None):
    """``d^l_{m mp}`` from the half-angle cosine and sine.

    ``cos_half``/``sin_half`` may be arrays, real or complex. ``cos_full``
    defaults to ``cos_half**2 - sin_half**2``.
    """
    a, b, k, pref = _d_params(l, m, mp)
    c = np.asarray(cos_half)
    s = np.asarray(sin_half)
    if cos_full is None:
        cos_full = c * c - s * s
    return pref * s ** a * c ** b * jacobi_p(k, a, b, cos_full)


def wigner_d_real(l: int, m: int, mp: int, beta) -> float:
    """Wigner small-d function ``d^l_{m mp}(beta)`` at a real angle."""
    _check_lm(l, m)
    _check_lm(l, mp, "mp")
    beta = np.asarray(beta, dtype=float)
    out = wigner_d_halfangle(l, m, mp, np.cos(0.5 * beta), np.sin(0.5 * beta), np.cos(beta))
    return out if out.ndim else float(out)


def wigner_d_complex(l: int, m: int, mp: int, angle) -> complex:
    """``d^l_{m mp}(i tau(x))`` at the imaginary angle of :class:`ComplexRotationAngle`.

    ``angle`` may also be a plain non-negative float ``x`` or an array of them.
    The result is ``(-i)^{|m-mp|}`` times a real number.
    """
    _check_lm(l, m)
    _check_lm(l, mp, "mp")
    x = angle.x if isinstance(angle, ComplexRotationAngle) else angle
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("complex rotation argument must be >= 0")
    C = np.sqrt(1.0 + x * x)
    a, b, k, pref = _d_params(l, m, mp)
    ch = np.sqrt(0.5 * (1.0 + C))
    sh = np.sqrt(0.5 * x * x / (C + 1.0))
    val = pref * sh ** a * ch ** b * jacobi_p(k, a, b, C)
    out = np.asarray((-1j) ** a * val)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# Modified spherical Bessel functions


def log_bessel_k_table(nmax: int, x) -> np.ndarray:
    """``log k_n(x)`` for ``n = 0..nmax``; shape ``(nmax + 1,) + x.shape``.

    ``k_n(x) = -i^n h_n^{(1)}(i x)`` without the ``pi/2`` factor, so
    ``k_0(x) = exp(-x)/x``. Uses the forward recurrence
    ``k_{n+1} = k_{n-1} + (2n+1)/x k_n`` written for the ratios
    ``r_n = k_n/k_{n-1}``, which stays finite where ``k_n`` itself overflows.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("k_n(x) requires x > 0")
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = -x - np.log(x)
    if nmax >= 1:
        r = 1.0 + 1.0 / x
        out[1] = out[0] + np.log(r)
        for n in range(2, nmax + 1):
            r = 1.0 / r + (2 * n - 1) / x
            out[n] = out[n - 1] + np.log(r)
    return out


def modified_spherical_bessel_k(n: int, x):
    """Modified spherical Bessel function ``k_n(x)`` (no ``pi/2`` factor).

    Parameters
    ----------
    n : int
        Order, ``n >= 0``.
    x : float or array_like
        Argument, strictly positive.
    """
    if n < 0:
        raise ValueError("order must be non-negative")
    out = np.exp(log_bessel_k_table(n, x)[n])
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Legendre functions and spherical harmonics


def assoc_legendre(l: int, m: int, x) -> complex:
    """Associated Legendre function ``P_l^m(x)`` for ``x >= 1``.

    Defined through the imaginary-angle rotation matrix,
    ``P_l^m(x) = sqrt((l+m)!/(l-m)!) d^l_{0 m}(i tau(sqrt(x^2 - 1)))``,
    which equals ``(-i)^m (x^2-1)^{m/2} d^m P_l/dx^m`` for ``m >= 0``.
    It is real for even ``m`` and imaginary for odd ``m``.
    """
    _check_lm(l, m)
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError("assoc_legendre is defined here for x >= 1")
    lf = 0.5 * (math.lgamma(l + m + 1) - math.lgamma(l - m + 1))
    arg = np.sqrt(np.maximum(x * x - 1.0, 0.0))
    out = np.asarray(math.exp(lf) * wigner_d_complex(l, 0, m, arg))
    return out if out.ndim else complex(out)


def spherical_harmonic(l: int, m: int, theta, phi):
    """Orthonormal ``Y_lm(theta, phi)`` with the Condon-Shortley phase."""
    _check_lm(l, m)
    return special.sph_harm_y(l, m, theta, phi)


def normalized_legendre(lmax: int, mmax: int, theta) -> np.ndarray:
    """Theta part of ``Y_lm`` for ``0 <= m <= mmax``: array ``[l, m, ...]``."""
    theta = np.asarray(theta, dtype=float)
    P = special.sph_legendre_p_all(lmax, mmax, theta)[0]
    return P[:, : mmax + 1]


@lru_cache(maxsize=32)
def _half_range_blocks(lmax: int):
    n = max(256, lmax + 2)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    P = normalized_legendre(lmax, lmax, np.arccos(x))
    blocks = []
    for m in range(lmax + 1):
        Pm = P[m:, m, :]
        blocks.append(2 * math.pi * (Pm * w) @ Pm.T)
    return blocks


def half_range_overlap(l: int, m: int, lp: int, mp: int) -> float:
    """Half-range overlap ``<l m|B|l' m'>`` of spherical harmonics over ``s_z > 0``.

    The integrand ``P_l^m P_l'^m`` is a polynomial of degree ``l + l'`` for
    every ``m`` (the ``(1-x^2)^{m/2}`` factors pair up), so Gauss-Legendre
    quadrature on ``[0, 1]`` is exact.
    """
    _check_lm(l, m)
    _check_lm(lp, mp, "mp")
    if m != mp:
        return 0.0
    blk = _half_range_blocks(max(l, lp))[abs(m)]
    return float(blk[l - abs(m), lp - abs(m)])


@lru_cache(maxsize=32)
def half_range_matrix(lmax: int) -> np.ndarray:
    """Dense ``B`` over all ``(l, m)`` with ``l <= lmax`` in :func:`lm_index` order."""
    n = (lmax + 1) ** 2
    B = np.zeros((n, n))
    blocks = _half_range_blocks(lmax)
    for m in range(-lmax, lmax + 1):
        blk = blocks[abs(m)]
        idx = [lm_index(l, m) for l in range(abs(m), lmax + 1)]
        B[np.ix_(idx, idx)] = blk
    B.setflags(write=False)
    return B


def wigner_d_complex_table(lmax: int, x) -> np.ndarray:
    """All ``d^l_{m M}(i tau(x))`` for ``l <= lmax``.

    Returns a complex array of shape ``x.shape + (lmax+1, 2lmax+1, 2lmax+1)``
    indexed ``[..., l, m + lmax, M + lmax]``; entries with ``|m| > l`` or
    ``|M| > l`` are zero.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (lmax + 1, 2 * lmax + 1, 2 * lmax + 1), complex)
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            for M in range(-l, l + 1):
                out[..., l, m + lmax, M + lmax] = wigner_d_complex(l, m, M, x)
    return out


def wigner_d_real_table(lmax: int, beta) -> np.ndarray:
    """Real-angle counterpart of :func:`wigner_d_complex_table`."""
    beta = np.asarray(beta, dtype=float)
    out = np.zeros(beta.shape + (lmax + 1, 2 * lmax + 1, 2 * lmax + 1))
    c, s, cf = np.cos(0.5 * beta), np.sin(0.5 * beta), np.cos(beta)
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            for M in range(-l, l + 1):
                out[..., l, m + lmax, M + lmax] = wigner_d_halfangle(l, m, M, c, s, cf)
    return out


def _jacobi_multi(n, a, b, x):
    """``P_{n_i}^{(a_i, b_i)}(x)`` for parameter arrays ``n, a, b`` (shape ``(k,)``)
    against arguments ``x`` (shape ``(p,)``); returns ``(k, p)``."""
    n = np.asarray(n)[:, None]
    a = np.asarray(a, float)[:, None]
    b = np.asarray(b, float)[:, None]
    x = np.asarray(x)[None, :]
    p0 = np.ones(np.broadcast(n, x).shape, dtype=np.result_type(x, float))
    out = p0.copy()
    if n.size == 0 or n.max() == 0:
        return out
    p1 = (a + 1) + 0.5 * (a + b + 2) * (x - 1)
    out = np.where(n == 1, p1, out)
    for k in range(2, int(n.max()) + 1):
        s = 2 * k + a + b
        c1 = 2 * k * (k + a + b) * (s - 2)
        c2 = (s - 1) * (s * (s - 2) * x + a * a - b * b)
        c3 = 2 * (k + a - 1) * (k + b - 1) * s
        p0, p1 = p1, (c2 * p1 - c3 * p0) / c1
        out = np.where(n == k, p1, out)
    return out


def wigner_d_complex_column(lmax: int, M: int, x) -> np.ndarray:
    """``d^l_{m M}(i tau(x))`` for all ``(l, m)`` with ``|M| <= l <= lmax``.

    Returns a complex array of shape ``((lmax+1)^2, x.size)`` in
    :func:`lm_index` row order; rows with ``l < |M|`` are zero. Same values as
    :func:`wigner_d_complex`, vectorized over the row index.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("complex rotation argument must be >= 0")
    ls, ms = [], []
    for l in range(abs(M), lmax + 1):
        for m in range(-l, l + 1):
            ls.append(l)
            ms.append(m)
    ls, ms = np.array(ls, int), np.array(ms, int)
    out = np.zeros(((lmax + 1) ** 2, x.size), complex)
    if ls.size == 0:
        return out
    a = np.abs(ms - M)
    b = np.abs(ms + M)
    k = ls - np.maximum(np.abs(ms), abs(M))
    lz = 0.5 * (special.gammaln(k + 1) + special.gammaln(k + a + b + 1)
                - special.gammaln(k + a + 1) - special.gammaln(k + b + 1))
    sign = np.where((ms > M) & ((ms - M) % 2 == 1), -1.0, 1.0)
    C = np.sqrt(1.0 + x * x)
    ch = np.sqrt(0.5 * (1.0 + C))
    sh = np.sqrt(0.5 * x * x / (C + 1.0))
    val = (sign * np.exp(lz))[:, None] * sh[None, :] ** a[:, None] * ch[None, :] ** b[:, None]
    val = val * _jacobi_multi(k, a, b, C)
    phase = (-1j) ** (a % 4)
    out[ls * ls + ls + ms] = phase[:, None] * val
    return out

"""Infinite-medium Green's function in real space.

Two angular frames are supported. In the *axis* frame the polar axis points
from source to detector and ``chi`` is diagonal in ``m``. In the *source*
frame the polar axis is the source direction and only ``m' = 0`` columns of
``chi`` enter the intensity.

All mode sums run over the positive eigenvalues of each block and use the
modified spherical Bessel functions ``k_L(R/lambda)``. The kernel

    T^{|M|}_{L l l'}(R) = sum_n phi_l phi_l' lambda_n^{-3} k_L(R/lambda_n)

is shared by both frames; it is built per ``L`` with a log-domain scale so
that the factorial growth of ``k_L`` at large order does not overflow.

The same growth makes the sums over ``L`` and modes cancel: the terms exceed
the result by a factor that rises steeply with ``l_max`` and with
``lambda / R``. At ``g = 0.5``, ``mu_a/mu_s = 0.5`` and ``l_max = 8`` the
relative round-off is ~1e-7 at ``R = 2`` and ~1e-12 at ``R = 6`` (lengths in
transport mean free paths); at ``R = 20`` it passes 1e-6 near ``l_max = 24``.
``chi_source_table(..., roundoff=True)`` returns a scale for this error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .special_functions import log_bessel_k_table, threej_even_table
from .spectral import NumericError, SpectralDecomposition

__all__ = [
    "Frame",
    "SourceDetectorConfig",
    "mode_kernel",
    "chi_axis_table",
    "chi_source_table",
    "chi_axis_frame",
    "chi_source_frame",
    "ballistic_subtraction",
    "specific_intensity",
    "intensity_source_frame",
    "intensity_axis_frame",
    "harmonics",
]

IMAG_TOL = 1e-9


def _unit(v, name="vector"):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise ValueError(f"{name} must be nonzero and finite")
    return v / n


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal frame ``(ex, ey, ez)``."""

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray

    @classmethod
    def from_z(cls, z, x_hint=None) -> "Frame":
        """Frame with polar axis ``z``; ``x_hint`` fixes the azimuth origin."""
        ez = _unit(z, "polar axis")
        if x_hint is None:
            # deterministic choice: the lab axis least aligned with ez
            x_hint = np.eye(3)[int(np.argmin(np.abs(ez)))]
        ex = np.asarray(x_hint, float) - np.dot(x_hint, ez) * ez
        if np.linalg.norm(ex) < 1e-12:
            return cls.from_z(ez)  # hint parallel to the axis
        ex = ex / np.linalg.norm(ex)
        ey = np.cross(ez, ex)
        return cls(ex, ey, ez)

    @classmethod
    def lab(cls) -> "Frame":
        e = np.eye(3)
        return cls(e[0], e[1], e[2])

    def angles(self, v):
        """Polar and azimuthal angles of (rows of) ``v`` in this frame."""
        v = np.atleast_2d(np.asarray(v, float))
        x, y, z = v @ self.ex, v @ self.ey, v @ self.ez
        # atan2 keeps full precision near the poles, where arccos does not
        return np.arctan2(np.hypot(x, y), z), np.arctan2(y, x)

    def coords(self, v):
        v = np.asarray(v, float)
        return np.array([v @ self.ex, v @ self.ey, v @ self.ez])


@dataclass
class SourceDetectorConfig:
    """Point unidirectional source and point detector.

    Positions and directions are 3-vectors; directions are normalized on
    construction.
    """

    r0: np.ndarray
    s0: np.ndarray
    r: np.ndarray
    s: np.ndarray
    l_max: int
    subtract_ballistic: bool = True

    def __post_init__(self):
        self.r0 = np.asarray(self.r0, float)
        self.r = np.asarray(self.r, float)
        self.s0 = _unit(self.s0, "s0")
        self.s = _unit(self.s, "s")
        if np.linalg.norm(self.r - self.r0) == 0:
            raise ValueError("source and detector coincide")
        if self.l_max < 0:
            raise ValueError("l_max must be non-negative")


def harmonics(lmax: int, theta, phi) -> np.ndarray:
    """``Y_lm(theta, phi)`` for all ``l <= lmax``; array ``[..., l, m + lmax]``."""
    theta = np.atleast_1d(np.asarray(theta, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    P = special.sph_legendre_p_all(lmax, lmax, theta)[0]  # [l, m(wrapped), pts]
    out = np.zeros(theta.shape + (lmax + 1, 2 * lmax + 1), complex)
    for m in range(-lmax, lmax + 1):
        out[..., :, m + lmax] = np.moveaxis(P[:, m], 0, -1) * np.exp(1j * m * phi)[..., None]
    return out


# ---------------------------------------------------------------------------
# mode kernel


def mode_kernel(decomp: SpectralDecomposition, R: float, lmax: int, n_modes: int | None = None,
                absolute: bool = False):
    """Kernel ``T^{|M|}[L, l, l']`` for ``0 <= |M| <= lmax``.

    Returns a list indexed by ``|M|`` of arrays of shape
    ``(2 lmax + 1, lmax + 1, lmax + 1)``; rows with ``l < |M|`` are zero.
    With ``absolute`` the eigenvector components enter by modulus, which
    gives the scale of the individual terms for round-off estimates.
    """
    if not (R > 0):
        raise ValueError("separation R must be positive")
    if lmax > decomp.l_max:
        raise ValueError(f"lmax={lmax} exceeds decomposition l_max={decomp.l_max}")
    Lmax = 2 * lmax
    out = []
    for M in range(lmax + 1):
        blk = decomp.block(M)
        lam = blk.eigenvalues[:n_modes]
        Phi = blk.rows(lmax)[:, : lam.size]
        if absolute:
            Phi = np.abs(Phi)
        T = np.zeros((Lmax + 1, lmax + 1, lmax + 1))
        if Phi.shape[0] == 0 or lam.size == 0:
            out.append(T)
            continue
        logw = log_bessel_k_table(Lmax, R / lam) - 3.0 * np.log(lam)
        scale = logw.max(axis=1)
        W = np.exp(logw - scale[:, None])
        core = np.einsum("in,Ln,jn->Lij", Phi, W, Phi, optimize=True)
        with np.errstate(over="ignore"):
            core *= np.exp(scale)[:, None, None]
        if not np.all(np.isfinite(core)):
            raise NumericError(f"mode kernel overflow at R={R} (block M={M}); "
                               "reduce l_max or increase R")
        T[:, M:, M:] = core
        out.append(T)
    return out


def _contract_M(T, A, lmax, absolute=False):
    """``V[L, l, l'] = sum_M (-1)^M (l l' L; M -M 0) T^{|M|}[L, l, l']``."""
    V = np.zeros_like(T[0])
    for M in range(lmax + 1):
        w = 1.0 if M == 0 else 2.0 * (-1) ** M
        a = A[M, : lmax + 1, : lmax + 1, : 2 * lmax + 1]
        if absolute:
            w, a = abs(w), np.abs(a)
        V += w * np.transpose(a, (2, 0, 1)) * T[M]
    return V


def _sigma_outer(decomp, lmax):
    s = np.sqrt(decomp.medium.sigma(np.arange(lmax + 1)))
    return np.outer(s, s)


def chi_axis_table(decomp: SpectralDecomposition, R: float, lmax: int,
                   n_modes: int | None = None) -> np.ndarray:
    """Matrix elements of ``chi`` in the source-detector axis frame.

    Returns ``X[m + lmax, l, l'] = <l m|chi(R; R_hat)|l' m>``; entries with
    ``|m| > min(l, l')`` vanish. The off-diagonal ``m != m'`` elements are
    identically zero and not stored.
    """
    A = threej_even_table(lmax, lmax, 2 * lmax)
    T = mode_kernel(decomp, R, lmax, n_modes)
    V = _contract_M(T, A, lmax)
    L = np.arange(2 * lmax + 1)
    X = np.zeros((2 * lmax + 1, lmax + 1, lmax + 1))
    for m in range(lmax + 1):
        val = np.einsum("L,ijL,Lij->ij", 2 * L + 1.0, A[m, : lmax + 1, : lmax + 1, :], V)
        val *= (-1) ** m / (2 * math.pi)
        X[lmax + m] = val
        X[lmax - m] = val
    return X / _sigma_outer(decomp, lmax)


def chi_source_table(decomp: SpectralDecomposition, r_rel, lmax: int,
                     n_modes: int | None = None, roundoff: bool = False):
    """Matrix elements ``<l m|chi(r; s0)|l' 0>`` in the source frame.

    ``r_rel`` is the detector position relative to the source, expressed in
    coordinates whose polar axis is the source direction. Returns complex
    ``X[l, m + lmax, l']``.

    With ``roundoff`` a second array is returned: machine epsilon times the
    same sums taken over the moduli of their terms. At large ``R / lambda``
    and high order the terms grow like ``k_L`` and cancel; this bound shows
    when the cancellation has used up double precision.
    """
    r_rel = np.asarray(r_rel, float)
    R = float(np.linalg.norm(r_rel))
    if R == 0:
        raise ValueError("zero source-detector separation")
    A = threej_even_table(lmax, lmax, 2 * lmax)
    Bt = threej_even_table(lmax, 2 * lmax, lmax)
    T = mode_kernel(decomp, R, lmax, n_modes)
    V = _contract_M(T, A, lmax)
    theta, phi = Frame.lab().angles(r_rel)
    Y = harmonics(2 * lmax, theta, phi)[0]  # [L, m + 2 lmax]
    L = np.arange(2 * lmax + 1)
    X = np.zeros((lmax + 1, 2 * lmax + 1, lmax + 1), complex)
    for m in range(-lmax, lmax + 1):
        am = abs(m)
        # sum over L of sqrt(2L+1) Y*_{Lm} (l L l'; m -m 0) V[L, l, l']
        w = np.sqrt(2 * L + 1.0) * np.conj(Y[:, m + 2 * lmax])
        val = np.einsum("L,iLj,Lij->ij", w, Bt[am, : lmax + 1, :, :], V)
        X[:, m + lmax, :] = (-1) ** am * val / math.sqrt(math.pi)
    X /= _sigma_outer(decomp, lmax)[:, None, :]
    if not roundoff:
        return X
    Va = _contract_M(mode_kernel(decomp, R, lmax, n_modes, absolute=True), A, lmax, True)
    E = np.zeros((lmax + 1, 2 * lmax + 1, lmax + 1))
    for m in range(-lmax, lmax + 1):
        w = np.sqrt(2 * L + 1.0) * np.abs(Y[:, m + 2 * lmax])
        E[:, m + lmax, :] = np.einsum("L,iLj,Lij->ij", w, np.abs(Bt[abs(m), : lmax + 1, :, :]), Va)
    E *= np.finfo(float).eps / math.sqrt(math.pi) / _sigma_outer(decomp, lmax)[:, None, :]
    return X, E


def chi_axis_frame(decomp, R, l, m, lp, mp, n_modes=None) -> float:
    """Single element ``<l m|chi(R; R_hat)|l' m'>``."""
    if m != mp:
        return 0.0
    lmax = max(l, lp)
    if abs(m) > min(l, lp):
        return 0.0
    return float(chi_axis_table(decomp, R, lmax, n_modes)[m + lmax, l, lp])


def chi_source_frame(decomp, r_rel, l, m, lp, n_modes=None) -> complex:
    """Single element ``<l m|chi(r; s0)|l' 0>`` with ``r_rel`` in the source frame."""
    lmax = max(l, lp)
    if abs(m) > l:
        return 0.0
    return complex(chi_source_table(decomp, r_rel, lmax, n_modes)[l, m + lmax, lp])


def ballistic_subtraction(l, m, lp, mp, R, mu_t) -> float:
    """Ballistic part of ``chi`` in the source frame for a detector on the beam."""
    if R <= 0:
        raise ValueError("R must be positive")
    if m != 0 or mp != 0:
        return 0.0
    return math.sqrt((2 * l + 1) * (2 * lp + 1)) * math.exp(-mu_t * R) / (4 * math.pi * R * R)


def _ballistic_matrix(lmax, R, mu_t):
    l = np.arange(lmax + 1)
    s = np.sqrt(2 * l + 1.0)
    return np.outer(s, s) * math.exp(-mu_t * R) / (4 * math.pi * R * R)


def _on_beam(r_rel, s0, tol=1e-10):
    # angle between r - r0 and s0 below ~sqrt(2 tol); generous enough for
    # geometry that went through a rotation in floating point
    R = np.linalg.norm(r_rel)
    return float(np.dot(r_rel, s0)) / R > 1 - tol


def _real(val, what):
    val = np.asarray(val)
    scale = max(np.max(np.abs(val)), 1e-300)
    if np.max(np.abs(val.imag)) > IMAG_TOL * scale:
        raise NumericError(f"{what}: imaginary residue {np.max(np.abs(val.imag)):.3e} "
                           f"exceeds tolerance relative to {scale:.3e}")
    return val.real


def intensity_source_frame(decomp, r0, s0, r, directions, lmax, subtract_ballistic=True,
                           n_modes=None, chi=None, frame=None):
    """Specific intensity at ``r`` for each row of ``directions`` (source frame route).

    ``chi`` may pass a precomputed :func:`chi_source_table` (with matching
    ``frame``) so angular scans reuse the expensive part.
    """
    s0 = _unit(s0, "s0")
    frame = frame or Frame.from_z(s0)
    r_rel = np.asarray(r, float) - np.asarray(r0, float)
    if chi is None:
        chi = chi_source_table(decomp, frame.coords(r_rel), lmax, n_modes)
    chi = chi[: lmax + 1, chi.shape[1] // 2 - lmax: chi.shape[1] // 2 + lmax + 1, : lmax + 1]
    col = np.sqrt((2 * np.arange(lmax + 1) + 1) / (4 * math.pi))
    vec = chi @ col  # [l, m]
    if subtract_ballistic and _on_beam(r_rel, s0):
        R = float(np.linalg.norm(r_rel))
        vec[:, lmax] -= _ballistic_matrix(lmax, R, decomp.medium.mu_t) @ col
    theta, phi = frame.angles(directions)
    Y = harmonics(lmax, theta, phi)
    return _real(np.einsum("plm,lm->p", Y, vec), "specific intensity")


def intensity_axis_frame(decomp, r0, s0, r, directions, lmax, subtract_ballistic=True,
                         n_modes=None, chi=None):
    """Specific intensity via the source-detector axis frame."""
    r_rel = np.asarray(r, float) - np.asarray(r0, float)
    R = float(np.linalg.norm(r_rel))
    frame = Frame.from_z(r_rel)
    if chi is None:
        chi = chi_axis_table(decomp, R, lmax, n_modes)
    c = chi.shape[0] // 2
    chi = chi[c - lmax: c + lmax + 1, : lmax + 1, : lmax + 1].copy()
    s0 = _unit(s0, "s0")
    if subtract_ballistic and _on_beam(r_rel, s0):
        chi[lmax] -= _ballistic_matrix(lmax, R, decomp.medium.mu_t)
    t0, p0 = frame.angles(s0)
    Y0 = harmonics(lmax, t0, p0)[0]  # [l', m]
    right = np.einsum("mij,jm->im", chi, np.conj(Y0))  # [l, m]
    theta, phi = frame.angles(directions)
    Y = harmonics(lmax, theta, phi)
    return _real(np.einsum("plm,lm->p", Y, right), "specific intensity")


def specific_intensity(config: SourceDetectorConfig, decomp: SpectralDecomposition,
                       frame: str = "source", n_modes: int | None = None) -> float:
    """Specific intensity ``G(r, s; r0, s0)`` truncated at ``l, l' <= l_max``.

    Lengths are in the units of the medium coefficients; for a medium built
    with :meth:`OpticalMedium.from_transport_units` the result is
    ``(l*)^2 I``.
    """
    f = intensity_source_frame if frame == "source" else intensity_axis_frame
    if frame not in ("source", "axis"):
        raise ValueError("frame must be 'source' or 'axis'")
    return float(f(decomp, config.r0, config.s0, config.r, config.s[None, :], config.l_max,
                   config.subtract_ballistic, n_modes)[0])

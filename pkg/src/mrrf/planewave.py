"""Plane-wave decomposition of the Green's function and evanescent modes.

The transverse Fourier kernel ``kappa(q; z)`` is a mode sum over positive
eigenvalues with Wigner functions evaluated at the imaginary rotation angle
``i tau(q lambda)``, where ``cos(i tau) = sqrt(1 + x^2)`` and
``sin(i tau) = -i x``. Matrices over ``(l, m)`` are stored in ``lm_index``
order (``l`` major, ``m`` ascending).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .greens import Frame, SourceDetectorConfig, harmonics
from .special_functions import (assoc_legendre, lm_index, wigner_d_complex,
                                wigner_d_complex_column)
from .spectral import NumericError, SpectralDecomposition

__all__ = [
    "TransverseWavevector",
    "KappaMatrix",
    "EtaSet",
    "DualBasis",
    "ConditioningError",
    "ConvergenceError",
    "decay_rate",
    "eta_vectors",
    "kappa",
    "kappa_planar_source",
    "kappa_normal_incidence",
    "evanescent_mode",
    "dual_basis",
    "greens_from_plane_waves",
    "default_q_max",
]

# exp(-745) underflows to zero in double precision
_UNDERFLOW = 745.0


class ConditioningError(NumericError):
    """Raised when the evanescent basis is numerically dependent."""

    def __init__(self, msg, cond):
        super().__init__(msg)
        self.cond = cond


class ConvergenceError(NumericError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, msg, estimate):
        super().__init__(msg)
        self.estimate = estimate


@dataclass(frozen=True)
class TransverseWavevector:
    """Wavevector in the ``x-y`` plane given by magnitude and azimuth."""

    q: float
    phi_q: float = 0.0

    def __post_init__(self):
        if not (self.q >= 0) or not math.isfinite(self.q):
            raise ValueError("q must be finite and non-negative")

    @classmethod
    def from_vector(cls, v) -> "TransverseWavevector":
        v = np.asarray(v, float)
        return cls(float(math.hypot(v[0], v[1])), float(math.atan2(v[1], v[0]) % (2 * math.pi)))

    @property
    def vector(self) -> np.ndarray:
        return self.q * np.array([math.cos(self.phi_q), math.sin(self.phi_q)])

    def __neg__(self):
        return TransverseWavevector(self.q, (self.phi_q + math.pi) % (2 * math.pi))


def _as_wavevector(q_vec) -> TransverseWavevector:
    if isinstance(q_vec, TransverseWavevector):
        return q_vec
    if np.ndim(q_vec) == 0:
        return TransverseWavevector(float(q_vec), 0.0)
    return TransverseWavevector.from_vector(q_vec)


def _lm_arrays(lmax):
    l = np.concatenate([np.full(2 * k + 1, k) for k in range(lmax + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(lmax + 1)])
    return l, m


def decay_rate(lam, q):
    """``Q = sqrt(q^2 + 1/lambda^2)``; ``lam`` may be an array of eigenvalues."""
    lam = np.asarray(lam, float)
    if np.any(lam <= 0):
        raise ValueError("decay rate needs positive eigenvalues")
    out = np.sqrt(q * q + 1.0 / (lam * lam))
    return out if out.ndim else float(out)


@dataclass
class EtaSet:
    """Coefficient vectors of evanescent modes at one ``|q|``.

    ``eta[:, j]`` is ``<l m|eta_mu(q)> = d^l_{m M}[i tau(q lambda)] <l|phi_n(M)>``
    and ``eta_minus[:, j]`` holds ``(-1)^{l+m} d^l_{m,-M} <l|phi_n(M)>``, the
    angular content of the mode decaying towards negative ``z``.
    """

    q: float
    lmax: int
    M: np.ndarray
    n: np.ndarray
    lam: np.ndarray
    Q: np.ndarray
    eta: np.ndarray
    eta_minus: np.ndarray

    @property
    def V(self):
        return 1.0 / (self.lam ** 2 * self.Q)


def eta_vectors(decomp: SpectralDecomposition, q: float, lmax: int | None = None,
                z_cut: float | None = None, n_modes: int | None = None) -> EtaSet:
    """Evanescent coefficient vectors for every retained mode.

    Modes whose factor ``exp(-|z|/lambda)`` underflows for ``|z| = z_cut``
    contribute exact zeros and are skipped.
    """
    lmax = decomp.l_max if lmax is None else lmax
    if lmax > decomp.l_max:
        raise ValueError(f"lmax={lmax} exceeds decomposition l_max={decomp.l_max}")
    lv, mv = _lm_arrays(lmax)
    cols, cols_m, Ms, ns, lams = [], [], [], [], []
    for M in range(-lmax, lmax + 1):
        blk = decomp.block(M)
        lam = blk.eigenvalues[:n_modes]
        keep = np.arange(lam.size)
        if z_cut is not None:
            keep = keep[z_cut / lam < _UNDERFLOW]
        if keep.size == 0:
            continue
        lam = lam[keep]
        Phi = blk.rows(lmax)[:, keep]
        x = q * lam
        E = np.zeros(((lmax + 1) ** 2, keep.size), complex)
        Em = np.zeros_like(E)
        D = wigner_d_complex_column(lmax, M, x)
        for l in range(abs(M), lmax + 1):
            sl = slice(l * l, (l + 1) ** 2)
            E[sl] = D[sl] * Phi[l - abs(M)][None, :]
            # (-1)^{l+m} d^l_{m,-M} = (-1)^{l+M} d^l_{-m,M}
            Em[sl] = (-1) ** ((l + M) % 2) * E[sl][::-1]
        cols.append(E)
        cols_m.append(Em)
        Ms.append(np.full(keep.size, M))
        ns.append(keep)
        lams.append(lam)
    if not cols:
        empty = np.zeros(0)
        return EtaSet(q, lmax, empty.astype(int), empty.astype(int), empty, empty,
                      np.zeros(((lmax + 1) ** 2, 0), complex), np.zeros(((lmax + 1) ** 2, 0), complex))
    lam = np.concatenate(lams)
    return EtaSet(q, lmax, np.concatenate(Ms), np.concatenate(ns), lam, decay_rate(lam, q),
                  np.hstack(cols), np.hstack(cols_m))


@dataclass
class KappaMatrix:
    """``<l m|kappa(q; z)|l' m'>`` over ``l, l' <= lmax`` in ``lm_index`` order."""

    q: TransverseWavevector
    z: float
    lmax: int
    values: np.ndarray

    def element(self, l, m, lp, mp) -> complex:
        return complex(self.values[lm_index(l, m), lm_index(lp, mp)])


def _check_z(z):
    if z == 0 or not math.isfinite(z):
        raise ValueError("kappa is defined for finite z != 0 (take one-sided limits)")


def kappa(decomp: SpectralDecomposition, q_vec, z: float, lmax: int | None = None,
          n_modes: int | None = None) -> KappaMatrix:
    """Transverse Fourier kernel ``kappa(q; z)`` of the Green's function."""
    _check_z(z)
    qv = _as_wavevector(q_vec)
    lmax = decomp.l_max if lmax is None else lmax
    E = eta_vectors(decomp, qv.q, lmax, z_cut=abs(z), n_modes=n_modes)
    lv, mv = _lm_arrays(lmax)
    a = np.exp(-1j * mv * qv.phi_q) / np.sqrt(decomp.medium.sigma(lv))
    w = np.exp(-E.Q * abs(z)) * E.V
    # the d-functions enter both sides unconjugated; only the phase flips
    K = (a[:, None] * E.eta * w) @ (a.conj()[:, None] * E.eta).T
    if z < 0:
        s = (-1.0) ** ((lv + mv) % 2)
        K = K * np.outer(s, s)
    return KappaMatrix(qv, float(z), lmax, K)


def kappa_planar_source(decomp: SpectralDecomposition, z: float, lmax: int | None = None,
                        n_modes: int | None = None) -> KappaMatrix:
    """``kappa(0; z)``: one-dimensional propagation from a planar source."""
    _check_z(z)
    lmax = decomp.l_max if lmax is None else lmax
    lv, mv = _lm_arrays(lmax)
    K = np.zeros(((lmax + 1) ** 2,) * 2, complex)
    sg = np.sqrt(decomp.medium.sigma(np.arange(lmax + 1)))
    for M in range(-lmax, lmax + 1):
        blk = decomp.block(M)
        lam = blk.eigenvalues[:n_modes]
        keep = abs(z) / lam < _UNDERFLOW
        lam = lam[keep]
        Phi = blk.rows(lmax)[:, : keep.size][:, keep]
        if lam.size == 0:
            continue
        l = np.arange(abs(M), lmax + 1)
        sub = (Phi * (np.exp(-abs(z) / lam) / lam)) @ Phi.T / np.outer(sg[l], sg[l])
        if z < 0:
            s = (-1.0) ** l
            sub = sub * np.outer(s, s)
        idx = np.array([lm_index(k, M) for k in l])
        K[np.ix_(idx, idx)] = sub
    return KappaMatrix(TransverseWavevector(0.0), float(z), lmax, K)


def kappa_normal_incidence(decomp: SpectralDecomposition, q: float, z: float, l: int, lp: int,
                           n_modes: int | None = None) -> complex:
    """``<l 0|kappa(q; z)|l' 0>`` through associated Legendre functions of ``lambda Q``."""
    _check_z(z)
    lmax = max(l, lp)
    if lmax > decomp.l_max:
        raise ValueError("degree exceeds decomposition l_max")
    total = 0.0 + 0.0j
    for M in range(-min(l, lp), min(l, lp) + 1):
        blk = decomp.block(M)
        lam = blk.eigenvalues[:n_modes]
        lam = lam[abs(z) / lam < _UNDERFLOW]
        if lam.size == 0:
            continue
        Phi = blk.rows(lmax)
        Q = decay_rate(lam, q)
        arg = np.sqrt(1.0 + (lam * q) ** 2)   # lam * Q, kept >= 1 under rounding
        nl = math.exp(0.5 * (math.lgamma(l - M + 1) - math.lgamma(l + M + 1)))
        nlp = math.exp(0.5 * (math.lgamma(lp - M + 1) - math.lgamma(lp + M + 1)))
        Pl = nl * assoc_legendre(l, M, arg)
        Plp = nlp * assoc_legendre(lp, M, arg)
        ker = np.exp(-Q * abs(z)) / (lam ** 2 * Q)
        total += np.sum(Pl * Phi[l - abs(M), : lam.size] * ker * Phi[lp - abs(M), : lam.size] * Plp)
    sign = 1.0 if z > 0 or (l + lp) % 2 == 0 else -1.0
    return complex(sign * total / math.sqrt(decomp.medium.sigma(l) * decomp.medium.sigma(lp)))


def evanescent_mode(decomp: SpectralDecomposition, q_vec, mode, sign: str, r, s,
                    lmax: int | None = None) -> complex:
    """Evaluate ``I^{(+)}`` or ``I^{(-)}`` of mode ``mu = (M, n)`` at ``(r, s)``.

    ``sign`` is ``'+'`` (decaying towards ``+z``) or ``'-'``.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    qv = _as_wavevector(q_vec)
    lmax = decomp.l_max if lmax is None else lmax
    M, n = mode.M, mode.n
    blk = decomp.block(M)
    lam = float(blk.eigenvalues[n])
    Q = decay_rate(lam, qv.q)
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    s = s / np.linalg.norm(s)
    theta, phi = Frame.lab().angles(s)
    Y = harmonics(lmax, theta, phi)[0]
    x = qv.q * lam
    acc = 0.0 + 0.0j
    for l in range(abs(M), lmax + 1):
        c = blk.eigenvectors[l - abs(M), n] / math.sqrt(decomp.medium.sigma(l))
        for m in range(-l, l + 1):
            if sign == "+":
                d = wigner_d_complex(l, m, M, x)
            else:
                d = (-1) ** ((l + m) % 2) * wigner_d_complex(l, m, -M, x)
            acc += Y[l, m + lmax] * np.exp(-1j * m * qv.phi_q) * d * c
    transverse = np.dot(qv.vector, r[:2])
    if sign == "+":
        return complex(np.exp(1j * transverse - Q * r[2]) * acc)
    return complex((-1) ** (M % 2) * np.exp(1j * transverse + Q * r[2]) * acc)


@dataclass
class DualBasis:
    """Biorthogonal partners of ``{eta_mu(q), P eta_mu(q)}``.

    Columns follow :class:`EtaSet` ordering. ``zero`` holds the
    ``q``-independent null vectors of odd-dimensional truncated blocks (they
    complete the basis when ``l_max`` is even) and ``zeta_zero`` their duals.
    """

    q: float
    eta: EtaSet
    zeta: np.ndarray
    zeta_tilde: np.ndarray
    zero: np.ndarray
    zeta_zero: np.ndarray
    cond: float


def _null_vectors(decomp, lmax):
    from .spectral import block_offdiagonal
    vecs = []
    for M in range(-lmax, lmax + 1):
        dim = lmax + 1 - abs(M)
        if dim % 2 == 0:
            continue
        e = block_offdiagonal(decomp.medium, abs(M), dim)
        v = np.zeros(dim)
        v[0] = 1.0
        # B v = 0 with zero diagonal: v[k+1] = -e[k-1] v[k-1] / e[k]
        for k in range(1, dim - 1, 2):
            v[k + 1] = -e[k - 1] * v[k - 1] / e[k]
        v /= np.linalg.norm(v)
        full = np.zeros((lmax + 1) ** 2)
        for k in range(dim):
            full[lm_index(abs(M) + k, M)] = v[k]
        vecs.append(full)
    return np.array(vecs).T.reshape((lmax + 1) ** 2, -1)


def dual_basis(decomp: SpectralDecomposition, q: float, cond_max: float = 1e12) -> DualBasis:
    """Dual basis at ``|q|`` for a truncated (P_N) decomposition.

    Solves ``E^H Z = I`` for the stacked basis ``E = [eta, P eta, null]``
    rather than inverting explicitly.
    """
    if not decomp.truncated:
        raise ValueError("dual basis needs a truncated decomposition (truncated=True)")
    lmax = decomp.l_max
    E = eta_vectors(decomp, q, lmax)
    lv, _ = _lm_arrays(lmax)
    P = (-1.0) ** lv
    null = _null_vectors(decomp, lmax)
    big = np.hstack([E.eta, P[:, None] * E.eta, null.astype(complex)])
    if big.shape[0] != big.shape[1]:
        raise NumericError(f"evanescent basis is not square: {big.shape}")
    cond = float(np.linalg.cond(big))
    if not np.isfinite(cond) or cond > cond_max:
        raise ConditioningError(f"evanescent basis ill-conditioned at q={q}: cond={cond:.3e}", cond)
    Z = np.linalg.solve(big.conj().T, np.eye(big.shape[0]))
    N = E.eta.shape[1]
    return DualBasis(q, E, Z[:, :N], Z[:, N:2 * N], null, Z[:, 2 * N:], cond)


def default_q_max(dz: float) -> float:
    """Upper transverse wavenumber for separation ``dz``.

    The kernel decays at least like ``exp(-q|dz|)``; the polynomial growth
    of the complex-angle d-functions is covered by going to ``q|dz| = 60``.
    """
    return 60.0 / abs(dz)


def _plane_wave_sum(decomp, r0, s0, r, s, lmax, q_nodes, q_weights, n_phi, flip, n_modes):
    dz = r[2] - r0[2]
    up = (dz > 0) != flip
    lv, mv = _lm_arrays(lmax)
    inv_sig = 1.0 / np.sqrt(decomp.medium.sigma(lv))

    def ylm(v):
        v = v / np.linalg.norm(v)
        Y = harmonics(lmax, *Frame.lab().angles(v))[0]
        return np.array([Y[l, m + lmax] for l, m in zip(lv, mv)])

    Ys = ylm(s) * inv_sig
    Y0 = ylm(-s0) * inv_sig
    phis = 2 * math.pi * np.arange(n_phi) / n_phi
    ph = np.exp(-1j * np.outer(phis, mv))            # e^{-i m phi}
    ph_neg = ph * (-1.0) ** (mv % 2)[None, :]        # e^{-i m (phi + pi)}
    drho = r[:2] - r0[:2]
    qhat = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    total = 0.0 + 0.0j
    for q, wq in zip(q_nodes, q_weights):
        E = eta_vectors(decomp, q, lmax, z_cut=abs(dz), n_modes=n_modes)
        if E.lam.size == 0:
            continue
        sgnM = (-1.0) ** (E.M % 2)
        if up:   # I^(+)_q(r, s) I^(-)_{-q}(r0, -s0)
            left = (ph * Ys[None, :]) @ E.eta
            right = (ph_neg * Y0[None, :]) @ E.eta_minus * sgnM[None, :]
            expo = -E.Q * dz
        else:    # I^(-)_q(r, s) I^(+)_{-q}(r0, -s0)
            left = (ph * Ys[None, :]) @ E.eta_minus * sgnM[None, :]
            right = (ph_neg * Y0[None, :]) @ E.eta
            expo = E.Q * dz
        with np.errstate(over="ignore", invalid="ignore"):
            modal = (left * right) @ (E.V * np.exp(expo))
        trans = np.exp(1j * q * (qhat @ drho))
        total += wq * q * np.sum(trans * modal) * (2 * math.pi / n_phi)
    return total / (2 * math.pi) ** 2


def greens_from_plane_waves(decomp: SpectralDecomposition, config: SourceDetectorConfig,
                            q_max: float | None = None, n_q: int = 160, n_phi: int | None = None,
                            n_modes: int | None = None, rtol: float | None = None,
                            flip_sign: bool = False, return_estimate: bool = False):
    """Specific intensity from the evanescent-wave expansion.

    The transverse integral uses Gauss-Legendre nodes in ``q`` on
    ``[0, q_max]`` and a uniform azimuthal grid. The azimuthal count defaults
    to ``4 l_max + 4`` plus enough nodes to resolve ``exp(i q . d rho)``.
    An error estimate comes from repeating with three quarters of the radial
    nodes; with ``rtol`` set, exceeding it raises :class:`ConvergenceError`.

    ``flip_sign`` swaps the upper/lower branch selection; it exists only as
    a negative control.
    """
    r0, r = np.asarray(config.r0, float), np.asarray(config.r, float)
    dz = r[2] - r0[2]
    if dz == 0:
        raise ValueError("plane-wave expansion needs z != z0")
    lmax = config.l_max
    q_max = default_q_max(dz) if q_max is None else q_max
    rho = float(np.linalg.norm(r[:2] - r0[:2]))
    if n_phi is None:
        n_phi = 4 * lmax + 4 + 2 * int(math.ceil(q_max * rho)) + 8
    x, w = np.polynomial.legendre.leggauss(n_q)
    args = (decomp, r0, config.s0, r, config.s, lmax)
    val = _plane_wave_sum(*args, 0.5 * q_max * (x + 1), 0.5 * q_max * w, n_phi, flip_sign, n_modes)
    est = None
    if rtol is not None or return_estimate:
        n2 = max(8, (3 * n_q) // 4)
        x2, w2 = np.polynomial.legendre.leggauss(n2)
        val2 = _plane_wave_sum(*args, 0.5 * q_max * (x2 + 1), 0.5 * q_max * w2, n_phi, flip_sign,
                               n_modes)
        est = abs(val - val2)
        if rtol is not None and not est <= rtol * abs(val):
            raise ConvergenceError(f"plane-wave quadrature estimate {est:.3e} exceeds "
                                   f"{rtol:g} x |G| = {rtol * abs(val):.3e}", est)
    scale = max(abs(val), 1e-300)
    if abs(val.imag) > 1e-6 * scale:
        raise NumericError(f"plane-wave intensity has imaginary part {val.imag:.3e}")
    return (float(val.real), est) if return_estimate else float(val.real)

"""Independent numerical oracles used by the test suite."""
import math

import numpy as np

from mrrf.special_functions import wigner_d_real_table


def _kappa_integrand(decomp, lmax, q, phi_q, kz):
    """Integrand of the k_z representation of kappa (without exp(i kz z)/2pi).

    Uses real rotation angles cos(theta) = kz/k, sin(theta) = q/k and the
    combined contribution of each mode and its parity partner.
    """
    kz = np.asarray(kz, float)
    k = np.sqrt(q * q + kz * kz)
    theta = np.arctan2(q, kz)
    D = wigner_d_real_table(lmax, theta)  # [pt, l, m, M]
    n = (lmax + 1) ** 2
    ls = np.array([l for l in range(lmax + 1) for _ in range(2 * l + 1)])
    ms = np.array([m for l in range(lmax + 1) for m in range(-l, l + 1)])
    sig = decomp.medium.sigma(ls)
    out = np.zeros(kz.shape + (n, n), complex)
    par = (-1.0) ** (ls[:, None] + ls[None, :])
    for M in range(-lmax, lmax + 1):
        blk = decomp.block(M)
        lam = blk.eigenvalues
        Phi = blk.rows(lmax)
        # E[pt, lm, n] = d^l_{mM}(theta) phi_l
        E = np.zeros(kz.shape + (n, lam.size))
        for i, (l, m) in enumerate(zip(ls, ms)):
            if l >= abs(M):
                E[:, i, :] = D[:, l, m + lmax, M + lmax][:, None] * Phi[l - abs(M)][None, :]
        even = 1.0 / (lam[None, :] ** 2 * k[:, None] ** 2 + 1.0)
        odd = lam[None, :] * k[:, None] * even
        Et = E.transpose(0, 2, 1)
        Se = (E * even[:, None, :]) @ Et
        So = (E * odd[:, None, :]) @ Et
        out += (1 + par) * Se - 1j * (1 - par) * So
    phase = np.exp(-1j * np.subtract.outer(ms, ms) * phi_q) / np.sqrt(np.outer(sig, sig))
    return out * phase


def simpson_kappa(decomp, lmax, q, phi_q, z, kmax=1500.0, segments=None):
    """Fourth-order Simpson evaluation of kappa(q; z) over real k_z.

    The slowly decaying tails of the integrand (through k_z^-4) are removed
    with rational reference functions whose Fourier integrals are elementary;
    the remainder decays like k_z^-5 and is integrated on [-kmax, kmax] with
    piecewise uniform Simpson panels.
    """
    b = max(q, 1.0)
    # tails: k f_odd = a1 + a3/k^2 + ..., k^2 f_even = a2 + a4/k^2 + ...
    ks = np.array([250.0, 500.0, 1000.0, 2000.0, 4000.0])
    F = _kappa_integrand(decomp, lmax, q, phi_q, np.concatenate([ks, -ks]))
    Fo = 0.5 * (F[: ks.size] - F[ks.size:]) * ks[:, None, None]
    Fe = 0.5 * (F[: ks.size] + F[ks.size:]) * ks[:, None, None] ** 2
    V = np.vander(1.0 / ks ** 2, 4, increasing=True)
    co = np.linalg.lstsq(V, Fo.reshape(ks.size, -1), rcond=None)[0]
    ce = np.linalg.lstsq(V, Fe.reshape(ks.size, -1), rcond=None)[0]
    shape = F.shape[1:]
    a1, a3 = co[0].reshape(shape), co[1].reshape(shape)
    a2, a4 = ce[0].reshape(shape), ce[1].reshape(shape)
    c3 = a3 + a1 * b * b
    c4 = a4 + a2 * b * b
    az, sz = abs(z), math.copysign(1.0, z)
    eb = math.exp(-b * az)
    ref_ft = (a1 * 0.5j * sz * eb + a2 * eb / (2 * b)
              + c3 * 1j * z * eb / (4 * b) + c4 * (1 + b * az) * eb / (4 * b ** 3))

    def reference(kz):
        k2 = (kz * kz + b * b)[:, None, None]
        kk = kz[:, None, None]
        return (a1 * kk + a2) / k2 + (c3 * kk + c4) / k2 ** 2

    if segments is None:
        segments = [(0.0, 1.0, 4000), (1.0, 4.0, 3000), (4.0, 10.0, 3000), (10.0, 40.0, 6000),
                    (40.0, 150.0, 6000), (150.0, 600.0, 6000), (600.0, kmax, 3000)]
    total = 0.0
    for lo, hi, npan in segments:
        for sgn in (1.0, -1.0):
            kz = sgn * np.linspace(lo, hi, 2 * npan + 1)
            h = (hi - lo) / (2 * npan)
            acc = np.zeros(F.shape[1:], complex)
            for chunk in np.array_split(np.arange(kz.size), max(1, kz.size // 2000)):
                f = _kappa_integrand(decomp, lmax, q, phi_q, kz[chunk])
                ref = reference(kz[chunk])
                y = (f - ref) * np.exp(1j * kz[chunk] * z)[:, None, None]
                acc += _weighted_part(y, chunk, kz.size)
            total = total + acc * h / 3
    return total / (2 * math.pi) + ref_ft


def _weighted_part(y, idx, n):
    w = np.where(idx % 2 == 1, 4.0, 2.0)
    w = np.where((idx == 0) | (idx == n - 1), 1.0, w)
    return np.tensordot(w, y, axes=(0, 0))

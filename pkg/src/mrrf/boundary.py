"""Half-range boundary-value problems for a half-space and a slab.

All solvers work with the consistent spherical-harmonics truncation: each
block ``B(M)`` is cut at ``l <= l_max`` (odd), its zero eigenvalue is
dropped, and the remaining ``N = l_max (l_max + 1) / 2`` positive modes are
the unknowns. The boundary conditions are imposed through ``N`` half-range
moments, selected either by parity (rows with odd ``l + m``) or by the
leading eigenvectors of the truncated overlap matrix ``B``.

Coefficients are stored with the beam phase removed, ``f = F exp(i q . rho0)``,
and with the azimuthal phase of ``A(q_hat)`` factored out of the matrix, so one
factorization per ``|q|`` serves every azimuth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .greens import Frame, SourceDetectorConfig, harmonics, specific_intensity
from .planewave import EtaSet, TransverseWavevector, _as_wavevector, _lm_arrays, eta_vectors
from .special_functions import half_range_matrix, lm_index
from .spectral import NumericError, OpticalMedium, SpectralDecomposition, diagonalize

__all__ = [
    "BoundaryProblem",
    "BoundaryCoefficients",
    "BoundarySolver",
    "boundary_decomposition",
    "halfrange_rank",
    "assemble_halfspace_system",
    "test_functions",
    "solve_halfspace_external",
    "solve_slab_external",
    "solve_halfspace_internal",
    "boundary_residual",
    "evaluate_boundary_solution",
]

KINDS = ("halfspace_external", "slab_external", "halfspace_internal")


def _check_odd(lmax):
    if lmax < 1 or lmax % 2 == 0:
        raise ValueError(f"boundary problems need odd l_max >= 1, got {lmax}")


def boundary_decomposition(medium: OpticalMedium, l_max: int, threads: int = 1) -> SpectralDecomposition:
    """Truncated decomposition used by the boundary solvers."""
    _check_odd(l_max)
    return diagonalize(medium, l_max, truncated=True, threads=threads)


def _require(decomp):
    if not decomp.truncated:
        raise ValueError("boundary solvers need a truncated decomposition "
                         "(see boundary_decomposition)")
    _check_odd(decomp.l_max)


def halfrange_rank(lmax: int, tol: float = 1e-10):
    """Numerical rank of the truncated half-range overlap matrix.

    Returns ``(rank, size, eigenvalues)`` with rank counted relative to the
    largest eigenvalue.
    """
    B = half_range_matrix(lmax)
    w = np.linalg.eigvalsh(B)
    return int(np.sum(w > tol * w.max())), B.shape[0], w


@dataclass
class BoundaryProblem:
    """Geometry and source of a boundary problem.

    ``source`` is the beam entry point ``(x0, y0)`` for external problems and
    the point ``(x0, y0, z0)`` for the internal one. Lengths are in the
    medium's units.
    """

    kind: str
    s0: np.ndarray
    source: np.ndarray
    L: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.s0 = np.asarray(self.s0, float)
        self.s0 = self.s0 / np.linalg.norm(self.s0)
        self.source = np.asarray(self.source, float)
        if self.kind == "halfspace_internal":
            if self.source.shape != (3,) or not self.source[2] > 0:
                raise ValueError("internal source needs a 3-vector with z0 > 0")
        else:
            if self.source.shape != (2,):
                raise ValueError("external beam entry point must be (x0, y0)")
            if not self.s0[2] > 0:
                raise ValueError("incident beam must point into the medium (s0_z > 0)")
        if self.kind == "slab_external":
            if not (self.L > 0 and math.isfinite(self.L)):
                raise ValueError("slab thickness must be positive and finite")
        elif self.L != math.inf:
            raise ValueError("half-space problems take L = inf")

    @property
    def rho0(self):
        return self.source[:2]


@dataclass
class BoundaryCoefficients:
    """Mode amplitudes at one transverse wavevector.

    ``f_plus[j]`` multiplies ``I^(+)_{q, mu_j}``; for the slab ``g_minus[j]``
    multiplies ``exp(-Q (L - z))`` times the mode growing towards ``+z``
    (``F^(-) = g^(-) exp(-Q L)``).
    """

    q: TransverseWavevector
    eta: EtaSet
    f_plus: np.ndarray
    g_minus: np.ndarray | None = None
    method: str = "parity"


# ---------------------------------------------------------------------------
# test functions and system assembly


def test_functions(lmax: int, method: str = "parity"):
    """Rows defining the ``N`` half-range moments that are imposed.

    ``'parity'`` keeps unit rows with odd ``l + m``. ``'pinv'`` uses, for each
    ``m``, the leading ``floor((l_max + 1 - |m|)/2)`` eigenvectors of the
    truncated ``B``; this is the pseudoinverse route with the numerically
    nonzero eigenvalues chosen by count, since the truncated matrix has full
    rank. Returns ``(T, m_of_row)``.
    """
    _check_odd(lmax)
    n = (lmax + 1) ** 2
    rows, ms = [], []
    if method == "parity":
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                if (l + m) % 2:
                    e = np.zeros(n)
                    e[lm_index(l, m)] = 1.0
                    rows.append(e)
                    ms.append(m)
    elif method == "pinv":
        B = half_range_matrix(lmax)
        for m in range(-lmax, lmax + 1):
            idx = [lm_index(l, m) for l in range(abs(m), lmax + 1)]
            k = (lmax + 1 - abs(m)) // 2
            if k == 0:
                continue
            w, v = np.linalg.eigh(B[np.ix_(idx, idx)])
            for j in range(len(idx) - 1, len(idx) - 1 - k, -1):
                e = np.zeros(n)
                e[idx] = v[:, j]
                rows.append(e)
                ms.append(m)
    else:
        raise ValueError("method must be 'parity' or 'pinv'")
    return np.array(rows), np.array(ms)


def _inv_sqrt_sigma(decomp, lmax):
    lv, _ = _lm_arrays(lmax)
    return 1.0 / np.sqrt(decomp.medium.sigma(lv))


def assemble_halfspace_system(decomp: SpectralDecomposition, q_vec, s0):
    """Full, unfiltered half-space system ``B A(q_hat) eta F = Y*(s0)``.

    Rows run over all ``(l, m)`` in ``lm_index`` order and columns over the
    positive modes; the beam phase ``exp(-i q . rho0)`` is factored out.
    Returns ``(matrix, rhs, eta)``.
    """
    _require(decomp)
    qv = _as_wavevector(q_vec)
    lmax = decomp.l_max
    E = eta_vectors(decomp, qv.q, lmax)
    lv, mv = _lm_arrays(lmax)
    a = np.exp(-1j * mv * qv.phi_q) * _inv_sqrt_sigma(decomp, lmax)
    B = half_range_matrix(lmax)
    mat = B @ (a[:, None] * E.eta)
    rhs = np.conj(_ylm_vector(lmax, s0))
    return mat, rhs, E


def _ylm_vector(lmax, s):
    s = np.asarray(s, float)
    s = s / np.linalg.norm(s)
    Y = harmonics(lmax, *Frame.lab().angles(s))[0]
    lv, mv = _lm_arrays(lmax)
    return Y[lv, mv + lmax]


def _system_matrix(decomp, E, T, slab_L=None):
    """``phi``-free system matrix; the azimuthal phases sit on the rhs."""
    lmax = decomp.l_max
    B = half_range_matrix(lmax)
    isg = _inv_sqrt_sigma(decomp, lmax)
    top = T @ B @ (isg[:, None] * E.eta)
    if slab_L is None:
        return top
    lv, _ = _lm_arrays(lmax)
    P = (-1.0) ** lv
    sgnM = (-1.0) ** (E.M % 2)
    # growing-mode content on Y_lm(s): (-1)^M (-1)^l eta_minus / sqrt(sigma)
    grow = (isg * P)[:, None] * E.eta_minus * sgnM[None, :]
    decay = np.exp(-E.Q * slab_L)
    TB0 = T @ B
    TBL = (T * P[None, :]) @ B * P[None, :]  # half-range moments over s_z < 0
    K = np.block([
        [TB0 @ (isg[:, None] * E.eta), TB0 @ grow * decay[None, :]],
        [TBL @ (isg[:, None] * E.eta) * decay[None, :], TBL @ grow],
    ])
    return K


def _row_phase(ms, phi):
    """Inverse of the per-row azimuthal factor ``exp(-i m phi)``."""
    return np.exp(1j * np.multiply.outer(np.atleast_1d(phi), ms))


def _solve(K, rhs, q):
    try:
        lu = sla.lu_factor(K)
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericError(f"boundary system failed at q={q}: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) == 0):
        raise NumericError(f"singular boundary system at q={q}")
    return sla.lu_solve(lu, rhs)


def _external_rhs(lmax, s0, T, ms, phi):
    y = T @ np.conj(_ylm_vector(lmax, s0))
    return _row_phase(ms, phi) * y[None, :]


def _internal_rhs(decomp, E, T, ms, r0, s0, phi):
    lmax = decomp.l_max
    lv, mv = _lm_arrays(lmax)
    isg = _inv_sqrt_sigma(decomp, lmax)
    B = half_range_matrix(lmax)
    phis = np.atleast_1d(phi)
    y = _ylm_vector(lmax, -np.asarray(s0, float)) * isg
    # I^(+)_{-q}(r0, -s0) with exp(-i q . rho0) removed: sum_lm Y_lm(-s0) e^{-im(phi+pi)} eta / sqrt(sigma)
    ph = np.exp(-1j * np.multiply.outer(phis + math.pi, mv))
    b = (ph * y[None, :]) @ E.eta * np.exp(-E.Q * r0[2])[None, :]
    sgnM = (-1.0) ** (E.M % 2)
    src = T @ B @ (isg[:, None] * E.eta_minus) * (sgnM * E.V)[None, :]
    # the row phases of A(q_hat) appear on both sides and cancel
    return -(b @ src.T)


def solve_halfspace_external(decomp: SpectralDecomposition, q_vec, s0, method: str = "parity"):
    """Coefficients ``f^(+)`` for a collimated beam entering a half-space."""
    _require(decomp)
    qv = _as_wavevector(q_vec)
    if not np.asarray(s0, float)[2] > 0:
        raise ValueError("incident beam must have s0_z > 0")
    T, ms = test_functions(decomp.l_max, method)
    E = eta_vectors(decomp, qv.q, decomp.l_max)
    K = _system_matrix(decomp, E, T)
    f = _solve(K, _external_rhs(decomp.l_max, s0, T, ms, qv.phi_q)[0], qv.q)
    return BoundaryCoefficients(qv, E, f, None, method)


def solve_slab_external(decomp: SpectralDecomposition, q_vec, s0, L: float, method: str = "parity"):
    """Coefficients ``(f^(+), g^(-))`` for a beam entering the slab ``0 < z < L``."""
    _require(decomp)
    if not L > 0:
        raise ValueError("slab thickness must be positive")
    qv = _as_wavevector(q_vec)
    T, ms = test_functions(decomp.l_max, method)
    E = eta_vectors(decomp, qv.q, decomp.l_max)
    K = _system_matrix(decomp, E, T, slab_L=L)
    top = _external_rhs(decomp.l_max, s0, T, ms, qv.phi_q)[0]
    sol = _solve(K, np.concatenate([top, np.zeros_like(top)]), qv.q)
    N = E.lam.size
    return BoundaryCoefficients(qv, E, sol[:N], sol[N:], method)


def solve_halfspace_internal(decomp: SpectralDecomposition, q_vec, r0, s0, method: str = "parity"):
    """Surface-term coefficients ``f^(+)`` for a point source at depth ``z0 > 0``."""
    _require(decomp)
    r0 = np.asarray(r0, float)
    if not r0[2] > 0:
        raise ValueError("internal source needs z0 > 0")
    qv = _as_wavevector(q_vec)
    T, ms = test_functions(decomp.l_max, method)
    E = eta_vectors(decomp, qv.q, decomp.l_max)
    K = _system_matrix(decomp, E, T)
    rhs = _internal_rhs(decomp, E, T, ms, r0, s0, qv.phi_q)[0]
    return BoundaryCoefficients(qv, E, _solve(K, rhs, qv.q), None, method)


def _boundary_vectors(decomp, coeffs: BoundaryCoefficients, z, L=None):
    """Harmonic coefficients of the surface-wave field at depth ``z``."""
    lmax = decomp.l_max
    E = coeffs.eta
    lv, mv = _lm_arrays(lmax)
    a = np.exp(-1j * mv * coeffs.q.phi_q) * _inv_sqrt_sigma(decomp, lmax)
    c = (a[:, None] * E.eta) @ (coeffs.f_plus * np.exp(-E.Q * z))
    if coeffs.g_minus is not None:
        P = (-1.0) ** lv
        sgnM = (-1.0) ** (E.M % 2)
        c = c + (a * P)[:, None] * E.eta_minus @ (coeffs.g_minus * sgnM * np.exp(-E.Q * (L - z)))
    return c


def boundary_residual(decomp: SpectralDecomposition, problem: BoundaryProblem,
                      coeffs: BoundaryCoefficients, projection: str = "imposed"):
    """Relative residual of the half-range boundary conditions at one ``q``.

    ``projection='imposed'`` measures the moments that define the solution;
    ``'full'`` measures every half-range moment ``l <= l_max``, which also
    contains the truncation error of the spherical-harmonics expansion.
    Returns a dict keyed by boundary (``'z=0'``, and ``'z=L'`` for slabs).
    """
    lmax = decomp.l_max
    B = half_range_matrix(lmax)
    lv, mv = _lm_arrays(lmax)
    P = (-1.0) ** lv
    if projection == "imposed":
        T, _ = test_functions(lmax, coeffs.method)
    elif projection == "full":
        T = np.eye(B.shape[0])
    else:
        raise ValueError("projection must be 'imposed' or 'full'")
    L = problem.L if problem.kind == "slab_external" else None
    c0 = _boundary_vectors(decomp, coeffs, 0.0, L)
    if problem.kind == "halfspace_internal":
        E = coeffs.eta
        a = np.exp(-1j * mv * coeffs.q.phi_q) * _inv_sqrt_sigma(decomp, lmax)
        y = _ylm_vector(lmax, -problem.s0) * _inv_sqrt_sigma(decomp, lmax)
        ph = np.exp(-1j * mv * (coeffs.q.phi_q + math.pi))
        b = (ph * y) @ E.eta * np.exp(-E.Q * problem.source[2])
        sgnM = (-1.0) ** (E.M % 2)
        c0 = c0 + (a[:, None] * E.eta_minus) @ (sgnM * E.V * b)
        target = np.zeros_like(c0)
    else:
        target = np.conj(_ylm_vector(lmax, problem.s0))
    res = T @ (B @ c0) - T @ target
    if problem.kind == "halfspace_internal":
        # relative to the direct (infinite-medium) term reaching the surface
        scale = np.linalg.norm(T @ (B @ (c0 - _boundary_vectors(decomp, coeffs, 0.0, L))))
    else:
        scale = np.linalg.norm(T @ target)
    scale = max(scale, 1e-300)
    out = {"z=0": float(np.linalg.norm(res) / scale)}
    if L is not None:
        cL = _boundary_vectors(decomp, coeffs, L, L)
        resL = (T * P[None, :]) @ B @ (P * cL)
        out["z=L"] = float(np.linalg.norm(resL) / scale)
    return out


# ---------------------------------------------------------------------------
# field evaluation


@dataclass
class BoundarySolver:
    """Transverse quadrature and per-``|q|`` coefficient cache for one problem.

    The radial grid is Gauss-Legendre on ``[0, q_max]``; the azimuthal grid
    is uniform with ``n_phi`` nodes. Coefficients for all azimuths of a
    radial node come from one LU factorization and are cached by ``|q|``.
    """

    decomp: SpectralDecomposition
    problem: BoundaryProblem
    q_max: float
    n_q: int = 96
    n_phi: int | None = None
    method: str = "parity"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _require(self.decomp)
        if self.n_phi is None:
            self.n_phi = 4 * self.decomp.l_max + 4
        x, w = np.polynomial.legendre.leggauss(self.n_q)
        self.q_nodes = 0.5 * self.q_max * (x + 1)
        self.q_weights = 0.5 * self.q_max * w
        self.phis = 2 * math.pi * np.arange(self.n_phi) / self.n_phi
        self._T, self._ms = test_functions(self.decomp.l_max, self.method)

    def coefficients(self, q: float):
        """``(eta, f_plus[phi, mu], g_minus[phi, mu] or None)`` at ``|q|``."""
        key = float(q)
        if key in self._cache:
            return self._cache[key]
        d, p, T, ms = self.decomp, self.problem, self._T, self._ms
        E = eta_vectors(d, key, d.l_max)
        slab = p.kind == "slab_external"
        K = _system_matrix(d, E, T, slab_L=p.L if slab else None)
        if p.kind == "halfspace_internal":
            rhs = _internal_rhs(d, E, T, ms, p.source, p.s0, self.phis)
        else:
            rhs = _external_rhs(d.l_max, p.s0, T, ms, self.phis)
        if slab:
            rhs = np.hstack([rhs, np.zeros_like(rhs)])
        sol = _solve(K, rhs.T, key).T
        N = E.lam.size
        out = (E, sol[:, :N], sol[:, N:] if slab else None)
        self._cache[key] = out
        return out

    def surface_field(self, r, s) -> float:
        """Surface-wave part of the intensity (everything except the direct term)."""
        d, p = self.decomp, self.problem
        lmax = d.l_max
        r = np.asarray(r, float)
        lv, mv = _lm_arrays(lmax)
        P = (-1.0) ** lv
        ys = _ylm_vector(lmax, s) * _inv_sqrt_sigma(d, lmax)
        ph = np.exp(-1j * np.multiply.outer(self.phis, mv))
        qhat = np.stack([np.cos(self.phis), np.sin(self.phis)], axis=1)
        drho = r[:2] - p.source[:2]
        z = r[2]
        total = 0.0 + 0.0j
        for q, wq in zip(self.q_nodes, self.q_weights):
            E, fp, gm = self.coefficients(q)
            left = (ph * ys[None, :]) @ E.eta
            modal = np.sum(left * fp * np.exp(-E.Q * z)[None, :], axis=1)
            if gm is not None:
                sgnM = (-1.0) ** (E.M % 2)
                grow = (ph * (ys * P)[None, :]) @ E.eta_minus * sgnM[None, :]
                modal = modal + np.sum(grow * gm * np.exp(-E.Q * (p.L - z))[None, :], axis=1)
            trans = np.exp(1j * q * (qhat @ drho))
            total += wq * q * np.sum(trans * modal) * (2 * math.pi / self.n_phi)
        val = total / (2 * math.pi) ** 2
        if abs(val.imag) > 1e-6 * max(abs(val), 1e-300):
            raise NumericError(f"boundary field has imaginary part {val.imag:.3e}")
        return float(val.real)

    def intensity(self, r, s, subtract_ballistic: bool = False) -> float:
        """Specific intensity at ``r`` in direction ``s`` inside the medium."""
        p = self.problem
        r = np.asarray(r, float)
        if not r[2] > 0 or (p.kind == "slab_external" and not r[2] < p.L):
            raise ValueError("evaluation point must lie inside the medium")
        val = self.surface_field(r, s)
        if p.kind == "halfspace_internal":
            cfg = SourceDetectorConfig(p.source, p.s0, r, s, self.decomp.l_max, subtract_ballistic)
            val += specific_intensity(cfg, self.decomp)
        return val


def evaluate_boundary_solution(decomp: SpectralDecomposition, problem: BoundaryProblem, r, s,
                               q_max: float | None = None, n_q: int = 96, n_phi: int | None = None,
                               method: str = "parity") -> float:
    """Specific intensity of a boundary problem at ``(r, s)``.

    ``q_max`` defaults to ``60 / d`` with ``d`` the shortest decay length of
    the surface waves reaching ``r`` (its depth, the distance to the far face
    for a slab, or ``z + z0`` for an internal source).
    """
    r = np.asarray(r, float)
    if q_max is None:
        z = r[2]
        if problem.kind == "slab_external":
            d = min(z, problem.L - z)
        elif problem.kind == "halfspace_internal":
            d = z + problem.source[2]
        else:
            d = z
        if not d > 0:
            raise ValueError("evaluation point must lie inside the medium")
        q_max = 60.0 / d
    if n_phi is None:
        rho = float(np.linalg.norm(r[:2] - problem.source[:2]))
        n_phi = 4 * decomp.l_max + 4 + 2 * int(math.ceil(q_max * rho)) + 8
    solver = BoundarySolver(decomp, problem, q_max, n_q, n_phi, method)
    return solver.intensity(r, s)

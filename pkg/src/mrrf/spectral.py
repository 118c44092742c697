"""Medium description and spectral decomposition of the symmetrized streaming operator.

The operator ``W = S R S`` with ``S = Sigma^{-1/2}`` splits into tridiagonal
blocks ``B(M)`` labelled by the azimuthal number ``M``. Each block has zero
diagonal and off-diagonal entries ``beta_l(M) = b_{lM}/sqrt(sigma_l sigma_{l-1})``,
rows ``l = |M|, |M|+1, ...``. Eigenvalues come in ``+/-`` pairs related by the
parity map ``phi_l -> (-1)^l phi_l``, so only the positive half is stored.
"""
from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

logger = logging.getLogger(__name__)

__all__ = [
    "OpticalMedium",
    "ModeIndex",
    "BlockSpectrum",
    "SpectralDecomposition",
    "sigma",
    "coupling_b",
    "beta",
    "build_block",
    "block_offdiagonal",
    "diagonalize",
    "lift_eigenvector",
    "parity_partner",
    "gershgorin_bound",
    "closed_form_bound",
    "save_decomposition",
    "load_decomposition",
    "NumericError",
]

DEFAULT_BLOCK_DIM = 1000


class NumericError(RuntimeError):
    """Raised when a numerical routine fails to produce a trustworthy result."""


@dataclass(frozen=True)
class OpticalMedium:
    """Homogeneous absorbing and scattering medium.

    Parameters
    ----------
    mu_a, mu_s : float
        Absorption and scattering coefficients (inverse length).
    g : float
        Henyey-Greenstein anisotropy, used when ``phase_coeffs`` is not given.
    phase_coeffs : sequence of float, optional
        Explicit Legendre coefficients ``A_l`` with ``A_0 = 1``; ``A_l = 0``
        beyond the supplied list.
    """

    mu_a: float
    mu_s: float
    g: float = 0.0
    phase_coeffs: tuple | None = None

    def __post_init__(self):
        if not (self.mu_a > 0):
            raise ValueError("mu_a must be positive")
        if self.mu_s < 0:
            raise ValueError("mu_s must be non-negative")
        if self.phase_coeffs is not None:
            A = np.asarray(self.phase_coeffs, dtype=float)
            if A.size == 0 or abs(A[0] - 1.0) > 1e-12:
                raise ValueError("phase coefficients must start with A_0 = 1")
            if np.any(np.abs(A) > 1 + 1e-12):
                raise ValueError("phase coefficients must satisfy |A_l| <= 1")
            object.__setattr__(self, "phase_coeffs", tuple(float(a) for a in A))
            object.__setattr__(self, "g", float(A[1]) if A.size > 1 else 0.0)
        elif not (0 <= self.g < 1):
            raise ValueError("Henyey-Greenstein g must lie in [0, 1)")

    @classmethod
    def from_transport_units(cls, g: float, absorption_ratio: float) -> "OpticalMedium":
        """Medium with ``mu_a/mu_s = absorption_ratio`` and ``l* = 1``."""
        if absorption_ratio <= 0:
            raise ValueError("absorption ratio must be positive")
        mu_s = 1.0 / (absorption_ratio + 1.0 - g)
        return cls(mu_a=absorption_ratio * mu_s, mu_s=mu_s, g=g)

    @property
    def mu_t(self) -> float:
        return self.mu_a + self.mu_s

    @property
    def transport_mfp(self) -> float:
        return 1.0 / (self.mu_a + (1.0 - self.g) * self.mu_s)

    def A(self, l):
        """Phase-function coefficients ``A_l`` (vectorized)."""
        l = np.asarray(l)
        if self.phase_coeffs is None:
            return self.g ** l.astype(float)
        A = np.asarray(self.phase_coeffs)
        return np.where(l < A.size, A[np.minimum(l, A.size - 1)], 0.0)

    def sigma(self, l):
        return self.mu_a + self.mu_s * (1.0 - self.A(l))

    def digest(self) -> str:
        """Short hash identifying the phase function."""
        if self.phase_coeffs is None:
            key = f"hg:{self.g!r}"
        else:
            key = "A:" + ",".join(repr(a) for a in self.phase_coeffs)
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def sigma(medium: OpticalMedium, l):
    """``sigma_l = mu_a + mu_s (1 - A_l)``."""
    if np.any(np.asarray(l) < 0):
        raise ValueError("l must be non-negative")
    out = medium.sigma(l)
    return out if np.ndim(out) else float(out)


def coupling_b(l, m):
    """``b_{lm} = sqrt((l^2 - m^2)/(4 l^2 - 1))``."""
    l = np.asarray(l)
    m = np.asarray(m)
    if np.any(l < 1) or np.any(np.abs(m) > l):
        raise ValueError("coupling_b requires l >= 1 and |m| <= l")
    lf = l.astype(float)
    out = np.sqrt((lf * lf - m * m) / (4 * lf * lf - 1))
    return out if out.ndim else float(out)


def beta(medium: OpticalMedium, l, M):
    """Off-diagonal element ``beta_l(M) = b_{lM}/sqrt(sigma_l sigma_{l-1})``."""
    out = coupling_b(l, M) / np.sqrt(medium.sigma(l) * medium.sigma(np.asarray(l) - 1))
    return out if np.ndim(out) else float(out)


def block_offdiagonal(medium: OpticalMedium, M: int, dim: int) -> np.ndarray:
    """Off-diagonal ``beta_{|M|+1}(M), ..., beta_{|M|+dim-1}(M)``."""
    l = np.arange(abs(M) + 1, abs(M) + dim)
    return np.atleast_1d(beta(medium, l, M)) if dim > 1 else np.zeros(0)


def build_block(medium: OpticalMedium, M: int, dim: int) -> np.ndarray:
    """Dense symmetric tridiagonal block ``B(M)`` with rows ``l = |M| .. |M|+dim-1``.

    ``dim`` must be even: an even zero-diagonal tridiagonal matrix with
    nonzero couplings is nonsingular, so no zero eigenvalue appears.
    """
    if dim < 2 or dim % 2:
        raise ValueError(f"block dimension must be even and >= 2, got {dim}")
    e = block_offdiagonal(medium, M, dim)
    return np.diag(e, 1) + np.diag(e, -1)


def gershgorin_bound(medium: OpticalMedium, M: int, dim: int) -> float:
    """Largest Gershgorin row sum of ``B(M)``."""
    e = np.abs(block_offdiagonal(medium, M, dim))
    rows = np.zeros(dim)
    rows[:-1] += e
    rows[1:] += e
    return float(rows.max())


def closed_form_bound(medium: OpticalMedium, M: int) -> float:
    """Closed-form bound on ``|lambda|``: ``4 / (sqrt(3) mu_a)`` for ``M = 0``, else ``1 / mu_a``.

    Informational only; the ``M = 0`` value is read as ``4 / (sqrt(3) mu_a)``
    and is much looser than :func:`gershgorin_bound`.
    """
    return (4.0 / math.sqrt(3.0) if M == 0 else 1.0) / medium.mu_a


@dataclass(frozen=True)
class ModeIndex:
    """Mode label ``mu = (M, n)`` within the positive half of the spectrum."""

    M: int
    n: int


@dataclass
class BlockSpectrum:
    """Positive eigenpairs of one block ``B(M)``.

    ``eigenvectors[:, n]`` holds ``<l|phi_n(M)>`` for ``l = |M| .. |M|+dim-1``.
    """

    M: int
    dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def l0(self) -> int:
        return abs(self.M)

    @property
    def n_pos(self) -> int:
        return self.eigenvalues.size

    def rows(self, lmax: int) -> np.ndarray:
        """Eigenvector rows for ``l <= lmax`` (shape ``(lmax+1-|M|, n_pos)``)."""
        return self.eigenvectors[: max(lmax + 1 - self.l0, 0)]


def _fix_signs(V):
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-200)
        k = nz[0] if nz.size else int(np.argmax(np.abs(col)))
        if col[k] < 0:
            V[:, j] = -col
    return V


def _solve_block(medium, M, dim, allow_odd=False):
    if dim % 2 and not allow_odd:
        raise ValueError(f"block dimension must be even, got {dim}")
    if dim == 0:
        return BlockSpectrum(M, 0, np.zeros(0), np.zeros((0, 0)))
    e = block_offdiagonal(medium, M, dim)
    if dim == 1:
        return BlockSpectrum(M, 1, np.zeros(0), np.zeros((1, 0)))
    npos = dim // 2
    if npos == 0:
        return BlockSpectrum(M, dim, np.zeros(0), np.zeros((dim, 0)))
    # Bisection plus inverse iteration for the upper half only; this keeps
    # the residual small relative to each eigenvalue, including the tiny ones.
    try:
        w, V = eigh_tridiagonal(np.zeros(dim), e, select="i",
                                select_range=(dim - npos, dim - 1), lapack_driver="stebz")
    except Exception as exc:  # LinAlgError, ValueError from LAPACK
        raise NumericError(f"eigensolver failed for block M={M}: {exc}") from exc
    if not np.all(np.isfinite(w)) or not np.all(np.isfinite(V)):
        raise NumericError(f"non-finite eigenpairs in block M={M}")
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    if np.any(w <= 0):
        raise NumericError(f"block M={M} has non-positive eigenvalue in positive half")
    return BlockSpectrum(M, dim, w, _fix_signs(V))


@dataclass
class SpectralDecomposition:
    """Positive eigenpairs of every block ``|M| <= l_max``.

    ``blocks[M]`` for ``M >= 0``; negative ``M`` aliases ``|M|`` because
    ``B(M) = B(-M)``.

    When ``truncated`` is set, each block holds only rows ``l <= l_max``
    (dimension ``l_max + 1 - |M|``) and its zero eigenvalue, present for odd
    dimensions, is discarded. This is the consistent spherical-harmonics
    (P_N) truncation used by the boundary solvers.
    """

    medium: OpticalMedium
    l_max: int
    block_dim: int
    blocks: list = field(repr=False)
    truncated: bool = False

    def block(self, M: int) -> BlockSpectrum:
        if abs(M) > self.l_max:
            raise IndexError(f"block M={M} outside l_max={self.l_max}")
        return self.blocks[abs(M)]

    def modes(self):
        """All ``ModeIndex`` labels with ``-l_max <= M <= l_max``."""
        return [ModeIndex(M, n) for M in range(-self.l_max, self.l_max + 1)
                for n in range(self.block(M).n_pos)]

    @property
    def n_modes_total(self) -> int:
        return sum(self.block(M).n_pos for M in range(-self.l_max, self.l_max + 1))

    def eigenvalue(self, mode: ModeIndex) -> float:
        return float(self.block(mode.M).eigenvalues[mode.n])

    @property
    def max_eigenvalue(self) -> float:
        return max(float(b.eigenvalues[0]) for b in self.blocks if b.n_pos)

    @property
    def min_eigenvalue(self) -> float:
        return min(float(b.eigenvalues[-1]) for b in self.blocks if b.n_pos)


def diagonalize(medium: OpticalMedium, l_max: int, block_dim: int = DEFAULT_BLOCK_DIM,
                truncated: bool = False, threads: int = 1) -> SpectralDecomposition:
    """Diagonalize all blocks ``B(M)``, ``0 <= M <= l_max``.

    Parameters
    ----------
    block_dim : int
        Even dimension of every block (ignored when ``truncated``).
    truncated : bool
        Cut every block at ``l <= l_max`` instead.
    threads : int
        Worker threads; blocks are independent.
    """
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    def job(M):
        if truncated:
            return _solve_block(medium, M, l_max + 1 - M, allow_odd=True)
        return _solve_block(medium, M, block_dim)

    if threads > 1 and l_max > 0:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            blocks = list(ex.map(job, range(l_max + 1)))
    else:
        blocks = [job(M) for M in range(l_max + 1)]
    logger.debug("diagonalized %d blocks (dim=%s)", len(blocks),
                 "P_N" if truncated else block_dim)
    return SpectralDecomposition(medium, l_max, l_max + 1 if truncated else block_dim,
                                 blocks, truncated)


def lift_eigenvector(block: BlockSpectrum, n: int, l: int, m: int) -> float:
    """Component ``<l m|psi_{Mn}> = delta_{mM} <l|phi_n(M)>``."""
    if m != block.M:
        return 0.0
    k = l - block.l0
    if k < 0 or k >= block.dim:
        return 0.0
    return float(block.eigenvectors[k, n])


def parity_partner(block: BlockSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Negative-eigenvalue partners ``(-lambda, (-1)^l phi)`` of a block."""
    l = np.arange(block.l0, block.l0 + block.dim)
    return -block.eigenvalues, ((-1.0) ** l)[:, None] * block.eigenvectors


# ---------------------------------------------------------------------------
# persistence


def save_decomposition(decomp: SpectralDecomposition, path) -> None:
    """Write a decomposition to an ``.npz`` cache.

    Header fields ``mu_a``, ``mu_s``, ``g``, ``phase_digest``, ``l_max``,
    ``block_dim`` and ``truncated`` are followed by ``lam_<M>``/``phi_<M>``
    arrays for every block.
    """
    med = decomp.medium
    arrays = {
        "mu_a": np.float64(med.mu_a),
        "mu_s": np.float64(med.mu_s),
        "g": np.float64(med.g),
        "phase_digest": np.array(med.digest()),
        "l_max": np.int64(decomp.l_max),
        "block_dim": np.int64(decomp.block_dim),
        "truncated": np.bool_(decomp.truncated),
    }
    if med.phase_coeffs is not None:
        arrays["phase_coeffs"] = np.asarray(med.phase_coeffs)
    for b in decomp.blocks:
        arrays[f"lam_{b.M}"] = b.eigenvalues
        arrays[f"phi_{b.M}"] = b.eigenvectors
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_decomposition(path, medium: OpticalMedium | None = None, l_max: int | None = None,
                       block_dim: int | None = None) -> SpectralDecomposition | None:
    """Read a cache written by :func:`save_decomposition`.

    Returns ``None`` if the file is missing or its header does not match the
    requested medium, ``l_max`` (the cache may hold more blocks) or block size.
    """
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as f:
        coeffs = tuple(f["phase_coeffs"]) if "phase_coeffs" in f else None
        cached = OpticalMedium(float(f["mu_a"]), float(f["mu_s"]), float(f["g"]), coeffs)
        lm = int(f["l_max"])
        dim = int(f["block_dim"])
        trunc = bool(f["truncated"])
        if medium is not None and (cached.digest() != medium.digest()
                                   or cached.mu_a != medium.mu_a or cached.mu_s != medium.mu_s):
            return None
        if trunc or (block_dim is not None and dim != block_dim):
            return None
        if l_max is not None and lm < l_max:
            return None
        use = lm if l_max is None else l_max
        blocks = [BlockSpectrum(M, dim, np.array(f[f"lam_{M}"]), np.array(f[f"phi_{M}"]))
                  for M in range(use + 1)]
    return SpectralDecomposition(medium or cached, use, dim, blocks, False)

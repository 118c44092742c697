"""Command-line driver.

The config is flat ``key = value`` text with dotted sections; ``#`` starts a
comment. Example::

    preset = moderate-forward
    run.l_max = 24
    grid.n_angles = 181

Recognized keys are listed in :data:`KEYS`. Lengths are in transport mean
free paths when the medium is given by ``medium.g`` and
``medium.absorption_ratio`` (then ``mu_s = 1 / (ratio + 1 - g)``), or in the
units of ``medium.mu_a``/``medium.mu_s`` otherwise. Directions are given as
polar and azimuthal angles in radians.

Every command writes CSV with a header row and 17 significant digits.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 non-convergence
diagnostics present.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary import (BoundaryProblem, BoundarySolver, boundary_decomposition,
                       boundary_residual, solve_halfspace_external,
                       solve_halfspace_internal, solve_slab_external)
from .greens import Frame, chi_source_table, harmonics, intensity_source_frame
from .planewave import TransverseWavevector, kappa
from .spectral import (DEFAULT_BLOCK_DIM, NumericError, OpticalMedium,
                       SpectralDecomposition, closed_form_bound, diagonalize, gershgorin_bound,
                       load_decomposition, save_decomposition)
from .special_functions import lm_index

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONVERGENCE = 0, 2, 3, 4

# the round-off column is a scale, not a rigorous bound: eigenvector errors in
# the dense continuum exceed machine epsilon, so flag well before it nears tol
ROUNDOFF_LIMIT = 1e-6

KEYS = {
    "preset": str,
    "medium.mu_a": float,
    "medium.mu_s": float,
    "medium.g": float,
    "medium.absorption_ratio": float,
    "medium.phase_coeffs": "floats",
    "run.l_max": int,
    "run.block_dim": int,
    "run.n_modes": int,
    "run.sweep": bool,
    "run.tolerance": float,
    "geometry.kind": str,
    "geometry.z": float,
    "geometry.y": float,
    "geometry.y_list": "floats",
    "grid.n_angles": int,
    "kappa.q": float,
    "kappa.phi_q": float,
    "kappa.z": float,
    "boundary.kind": str,
    "boundary.L": float,
    "boundary.method": str,
    "source.position": "floats",
    "source.theta": float,
    "source.phi": float,
    "samples": "samples",
    "quad.q_max": float,
    "quad.n_q": int,
    "quad.n_phi": int,
}

# standard parameter sets for angular-profile runs
PRESETS = {
    "moderate-forward": {"medium.g": 0.5, "medium.absorption_ratio": 0.5, "run.l_max": 36,
                         "geometry.kind": "on-axis", "geometry.z": 20.0},
    "weak-absorption-forward": {"medium.g": 0.2, "medium.absorption_ratio": 0.01,
                                "run.l_max": 36, "geometry.kind": "on-axis", "geometry.z": 10.0},
    "tissue-on-axis": {"medium.g": 0.98, "medium.absorption_ratio": 6e-5, "run.l_max": 21,
                       "geometry.kind": "on-axis", "geometry.z": 6.0},
    "tissue-off-axis": {"medium.g": 0.98, "medium.absorption_ratio": 6e-5, "run.l_max": 21,
                        "geometry.kind": "alpha", "geometry.y": 5.0},
    "absorbing-off-axis": {"medium.g": 0.98, "medium.absorption_ratio": 0.2, "run.l_max": 39,
                           "geometry.kind": "alpha", "geometry.y": 22.0},
    "tissue-peak-scan": {"medium.g": 0.98, "medium.absorption_ratio": 6e-5, "run.l_max": 21,
                         "geometry.kind": "alpha",
                         "geometry.y_list": [2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0]},
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _parse_value(key, raw):
    kind = KEYS[key]
    try:
        if kind == "floats":
            return [float(t) for t in raw.replace(",", " ").split()]
        if kind == "samples":
            rows = [[float(t) for t in chunk.replace(",", " ").split()]
                    for chunk in raw.split(";") if chunk.strip()]
            if any(len(r) != 5 for r in rows):
                raise ValueError("each sample needs x y z theta phi")
            return rows
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "yes", "1")
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text: str) -> dict:
    """Parse config text into a dict of typed values (presets expanded)."""
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    if "preset" in values:
        name = values.pop("preset")
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        values = {**PRESETS[name], **values}
    return values


@dataclass
class RunConfig:
    """Validated run parameters shared by all commands."""

    medium: OpticalMedium
    l_max: int
    block_dim: int = DEFAULT_BLOCK_DIM
    n_modes: int | None = None
    values: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: dict, lmax_override: int | None = None) -> "RunConfig":
        v = values
        try:
            if "medium.absorption_ratio" in v:
                if "medium.mu_a" in v or "medium.mu_s" in v:
                    raise ConfigError("give either medium.absorption_ratio or mu_a/mu_s, not both")
                if "medium.g" not in v:
                    raise ConfigError("medium.absorption_ratio needs medium.g")
                med = OpticalMedium.from_transport_units(v["medium.g"], v["medium.absorption_ratio"])
            elif "medium.mu_a" in v and "medium.mu_s" in v:
                med = OpticalMedium(v["medium.mu_a"], v["medium.mu_s"], v.get("medium.g", 0.0),
                                    tuple(v["medium.phase_coeffs"]) if "medium.phase_coeffs" in v
                                    else None)
            else:
                raise ConfigError("medium needs mu_a and mu_s, or g and absorption_ratio")
        except ValueError as exc:
            raise ConfigError(f"medium: {exc}") from None
        l_max = lmax_override if lmax_override is not None else v.get("run.l_max")
        if l_max is None or l_max < 0:
            raise ConfigError("run.l_max must be given and non-negative")
        dim = v.get("run.block_dim", DEFAULT_BLOCK_DIM)
        if dim < 2 or dim % 2:
            raise ConfigError("run.block_dim must be even and >= 2")
        n_modes = v.get("run.n_modes")
        if n_modes is not None and n_modes < 1:
            raise ConfigError("run.n_modes must be positive")
        return cls(med, int(l_max), int(dim), n_modes, dict(v))

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}")
        return self.values[key]


def direction(theta: float, phi: float) -> np.ndarray:
    """Unit vector at polar angle ``theta`` and azimuth ``phi``."""
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def get_decomposition(cfg: RunConfig, cache: str | None = None, threads: int = 1) -> SpectralDecomposition:
    """Load the decomposition from ``cache`` if it matches, else compute (and store) it."""
    if cache is not None:
        d = load_decomposition(cache, cfg.medium, cfg.l_max, cfg.block_dim)
        if d is not None:
            logger.info("loaded decomposition from %s", cache)
            return d
    d = diagonalize(cfg.medium, cfg.l_max, cfg.block_dim, threads=threads)
    if cache is not None:
        save_decomposition(d, cache)
    return d


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) or isinstance(x, str):
        return str(x)
    return f"{float(x):.17g}"


@dataclass
class Table:
    """CSV payload plus the exit status of the command."""

    header: list
    rows: list
    status: int = EXIT_OK
    messages: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig, decomp: SpectralDecomposition) -> Table:
    """One row per positive eigenvalue of every block."""
    mu_t = cfg.medium.mu_t
    rows = []
    for b in decomp.blocks:
        bound = gershgorin_bound(cfg.medium, b.M, b.dim)
        closed = closed_form_bound(cfg.medium, b.M)
        for n, lam in enumerate(b.eigenvalues):
            cls = "discrete" if lam > 1.0 / mu_t else "continuum-discretized"
            rows.append([b.M, n, lam, cls, bound, closed])
    return Table(["M", "n", "lambda", "classification", "gershgorin_bound", "closed_form_bound"],
                 rows)


def angle_grid(n: int, kind: str) -> np.ndarray:
    """Uniform grid: closed ``[0, pi]`` for ``theta``/``beta``, half-open ``[0, 2 pi)`` for ``alpha``."""
    if n < 3:
        raise ConfigError("grid.n_angles must be at least 3")
    if kind == "alpha":
        return 2 * math.pi * np.arange(n) / n
    return np.linspace(0.0, math.pi, n)


def scan_geometry(kind: str, z: float | None = None, y: float | None = None, angles=None):
    """Detector position and direction array for a named scan.

    ``on-axis``: detector at ``(0, 0, z)``, ``s`` in the x-z plane at polar
    angle ``theta``. ``alpha``: detector at ``(0, y, 0)``,
    ``s = (0, sin a, cos a)``. ``beta``: detector at ``(0, y, 0)``,
    ``s = (sin b, cos b, 0)``, measured from ``+y``.
    """
    a = np.asarray(angles, float)
    zero = np.zeros_like(a)
    if kind == "on-axis":
        if z is None or z == 0:
            raise ConfigError("on-axis geometry needs a non-zero geometry.z")
        return np.array([0.0, 0.0, z]), np.stack([np.sin(a), zero, np.cos(a)], axis=1)
    if y is None or y == 0:
        raise ConfigError("off-axis geometry needs a non-zero geometry.y")
    r = np.array([0.0, y, 0.0])
    if kind == "alpha":
        return r, np.stack([zero, np.sin(a), np.cos(a)], axis=1)
    if kind == "beta":
        return r, np.stack([np.sin(a), np.cos(a), zero], axis=1)
    raise ConfigError(f"geometry.kind must be on-axis, alpha or beta (got {kind!r})")


SOURCE_POS = np.zeros(3)
SOURCE_DIR = np.array([0.0, 0.0, 1.0])


class ProfileScan:
    """Angular scans at one detector point, sharing a single ``chi`` table.

    ``chi`` elements do not depend on the truncation order, so the table for
    the largest ``l_max`` also serves every smaller one.
    """

    def __init__(self, decomp, r, n_modes=None):
        self.decomp = decomp
        self.r = np.asarray(r, float)
        self.frame = Frame.from_z(SOURCE_DIR)
        self.chi, self.err = chi_source_table(decomp, self.frame.coords(self.r - SOURCE_POS),
                                              decomp.l_max, n_modes, roundoff=True)

    def __call__(self, dirs, lmax=None, subtract_ballistic=True):
        lmax = self.decomp.l_max if lmax is None else lmax
        return intensity_source_frame(self.decomp, SOURCE_POS, SOURCE_DIR, self.r, dirs, lmax,
                                      subtract_ballistic, chi=self.chi, frame=self.frame)

    def roundoff(self, dirs, lmax=None):
        """Round-off scale of the intensity in each direction."""
        lmax = self.decomp.l_max if lmax is None else lmax
        c = self.err.shape[1] // 2
        E = self.err[: lmax + 1, c - lmax: c + lmax + 1, : lmax + 1]
        col = np.sqrt((2 * np.arange(lmax + 1) + 1) / (4 * math.pi))
        theta, phi = self.frame.angles(dirs)
        Y = np.abs(harmonics(lmax, theta, phi))
        return np.einsum("plm,lm->p", Y, E @ col)


def relative_increment(new, old) -> float:
    """Largest change between successive profiles relative to the profile peak."""
    return float(np.max(np.abs(new - old)) / np.max(np.abs(new)))


def cmd_profile(cfg: RunConfig, decomp: SpectralDecomposition, subtract_ballistic=True) -> Table:
    """Angular profile; with ``run.sweep`` one block of rows per ``l_max``."""
    kind = cfg.get("geometry.kind", "on-axis")
    n = cfg.get("grid.n_angles", 101)
    grid = angle_grid(n, "alpha" if kind == "alpha" else "theta")
    r, dirs = scan_geometry(kind, cfg.get("geometry.z"), cfg.get("geometry.y"), grid)
    scan = ProfileScan(decomp, r, cfg.n_modes)
    name = {"on-axis": "theta", "alpha": "alpha", "beta": "beta"}[kind]
    header = [name, "intensity", "l_max", "ballistic_subtracted", "increment", "roundoff"]
    flag = int(subtract_ballistic)
    table = Table(header, [])
    orders = range(1, cfg.l_max + 1) if cfg.get("run.sweep", False) else [cfg.l_max]
    tol = cfg.get("run.tolerance", 1e-3)
    prev = None
    for lmax in orders:
        vals = scan(dirs, lmax, subtract_ballistic)
        err = scan.roundoff(dirs, lmax)
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"non-finite intensity at l_max={lmax}")
        inc = math.nan if prev is None else relative_increment(vals, prev)
        table.rows.extend([a, v, lmax, flag, inc, e] for a, v, e in zip(grid, vals, err))
        prev = vals
    if len(orders) > 1:
        last = table.rows[-1][4]
        table.messages.append(f"relative increment at l_max={cfg.l_max}: {last:.3e} "
                              f"(tolerance {tol:g})")
        if not last < tol:
            table.status = EXIT_CONVERGENCE
    noise = float(np.max(err) / np.max(np.abs(vals)))
    if noise > ROUNDOFF_LIMIT:
        table.status = EXIT_CONVERGENCE
        table.messages.append(f"round-off scale {noise:.1e} of the peak at l_max={cfg.l_max}: "
                              "cancellation in the mode sums exceeds double precision")
    return table


def peak_position(grid, vals):
    """Grid maximum refined by a three-point parabola (periodic grid).

    Returns NaN when the maximum is not strictly interior, i.e. the profile
    is flat around its largest sample.
    """
    n = len(grid)
    k = int(np.argmax(vals))
    y0, y1, y2 = vals[(k - 1) % n], vals[k], vals[(k + 1) % n]
    den = y0 - 2 * y1 + y2
    if not den < 0:
        return math.nan
    h = grid[1] - grid[0]
    x = grid[k] + 0.5 * h * (y0 - y2) / den
    return float(grid[0] + (x - grid[0]) % (n * h))


def cmd_peak_scan(cfg: RunConfig, decomp: SpectralDecomposition, subtract_ballistic=True) -> Table:
    """Position ``alpha_0`` of the maximum of ``I(alpha)`` for each distance ``y``."""
    ys = cfg.get("geometry.y_list")
    if ys is None:
        ys = [cfg.require("geometry.y")]
    n = cfg.get("grid.n_angles", 101)
    grid = angle_grid(n, "alpha")
    table = Table(["y", "alpha0", "l_max"], [])
    for y in ys:
        r, dirs = scan_geometry("alpha", y=y, angles=grid)
        scan = ProfileScan(decomp, r, cfg.n_modes)
        vals = scan(dirs, subtract_ballistic=subtract_ballistic)
        a0 = peak_position(grid, vals)
        noise = float(np.max(scan.roundoff(dirs)) / np.max(np.abs(vals)))
        if noise > ROUNDOFF_LIMIT:
            table.status = EXIT_CONVERGENCE
            table.messages.append(f"y={y:g}: round-off scale {noise:.1e} of the peak")
        table.rows.append([y, a0, cfg.l_max])
        if math.isnan(a0):
            table.status = EXIT_CONVERGENCE
            table.messages.append(f"y={y:g}: no interior maximum")
    order = np.argsort(ys)
    a = np.array([table.rows[i][1] for i in order])
    ok = a[~np.isnan(a)]
    if ok.size > 1 and not (np.all(np.diff(ok) <= 0) and np.all(ok >= math.pi / 2)):
        table.status = EXIT_CONVERGENCE
        table.messages.append("alpha0 does not approach pi/2 monotonically from above")
    return table


def cmd_kappa_table(cfg: RunConfig, decomp: SpectralDecomposition) -> Table:
    """All elements ``<l m|kappa(q; z)|l' m'>`` for ``l, l' <= l_max``."""
    q = cfg.require("kappa.q")
    z = cfg.require("kappa.z")
    if q < 0:
        raise ConfigError("kappa.q must be non-negative")
    if z == 0:
        raise ConfigError("kappa.z must be non-zero")
    K = kappa(decomp, TransverseWavevector(q, cfg.get("kappa.phi_q", 0.0)), z, cfg.l_max,
              cfg.n_modes)
    rows = []
    L = cfg.l_max
    for l in range(L + 1):
        for m in range(-l, l + 1):
            for lp in range(L + 1):
                for mp in range(-lp, lp + 1):
                    v = K.values[lm_index(l, m), lm_index(lp, mp)]
                    rows.append([l, m, lp, mp, v.real, v.imag])
    return Table(["l", "m", "lp", "mp", "re", "im"], rows)


BOUNDARY_KINDS = {"halfspace-external": "halfspace_external", "slab-external": "slab_external",
                  "halfspace-internal": "halfspace_internal"}


def _boundary_problem(cfg: RunConfig) -> BoundaryProblem:
    kind = cfg.require("boundary.kind")
    if kind not in BOUNDARY_KINDS:
        raise ConfigError(f"boundary.kind must be one of {sorted(BOUNDARY_KINDS)}")
    kind = BOUNDARY_KINDS[kind]
    s0 = direction(cfg.get("source.theta", 0.0), cfg.get("source.phi", 0.0))
    default = [0.0, 0.0, 1.0] if kind == "halfspace_internal" else [0.0, 0.0]
    pos = cfg.get("source.position", default)
    L = cfg.get("boundary.L", math.inf)
    try:
        return BoundaryProblem(kind, s0, np.asarray(pos, float), L)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_boundary(cfg: RunConfig, decomp: SpectralDecomposition) -> Table:
    """Intensity of a half-space or slab problem at the configured samples.

    The ``residual`` column is the largest relative residual of the imposed
    half-range boundary moments over the radial quadrature nodes (azimuth
    zero); it is the same for every row.
    """
    if cfg.l_max % 2 == 0:
        raise ConfigError("boundary problems need an odd run.l_max")
    p = _boundary_problem(cfg)
    samples = cfg.get("samples", [[0.0, 0.0, 1.0, 0.0, 0.0]])
    pts = np.array([s[:3] for s in samples])
    for r in pts:
        if not r[2] > 0 or (p.kind == "slab_external" and not r[2] < p.L):
            raise ConfigError(f"sample point {r.tolist()} is outside the medium")
    method = cfg.get("boundary.method", "parity")
    if method not in ("parity", "pinv"):
        raise ConfigError("boundary.method must be parity or pinv")
    depth = pts[:, 2].copy()
    if p.kind == "slab_external":
        depth = np.minimum(depth, p.L - depth)
    elif p.kind == "halfspace_internal":
        depth = depth + p.source[2]
    q_max = cfg.get("quad.q_max", 60.0 / float(depth.min()))
    n_q = cfg.get("quad.n_q", 96)
    rho = float(np.max(np.linalg.norm(pts[:, :2] - p.source[None, :2], axis=1)))
    n_phi = cfg.get("quad.n_phi", 4 * cfg.l_max + 4 + 2 * int(math.ceil(q_max * rho)) + 8)
    solver = BoundarySolver(decomp, p, q_max, n_q, n_phi, method)

    solve = {"halfspace_external": lambda qv: solve_halfspace_external(decomp, qv, p.s0, method),
             "slab_external": lambda qv: solve_slab_external(decomp, qv, p.s0, p.L, method),
             "halfspace_internal": lambda qv: solve_halfspace_internal(decomp, qv, p.source,
                                                                       p.s0, method)}[p.kind]
    res = 0.0
    table = Table(["x", "y", "z", "theta", "phi", "intensity", "residual"], [])
    for qn in solver.q_nodes[:: max(1, n_q // 12)]:
        c = solve(TransverseWavevector(float(qn), 0.0))
        res = max(res, max(boundary_residual(decomp, p, c).values()))
        if p.kind == "slab_external":
            h = solve_halfspace_external(decomp, TransverseWavevector(float(qn), 0.0), p.s0, method)
            diff = np.max(np.abs(c.f_plus - h.f_plus)) / np.max(np.abs(h.f_plus))
            logger.info("q=%.4g: slab vs half-space coefficient difference %.3e", qn, diff)
    for s in samples:
        val = solver.intensity(s[:3], direction(s[3], s[4]))
        if not math.isfinite(val):
            raise NumericError(f"non-finite intensity at sample {s}")
        table.rows.append([*s, val, res])
    if res > 1e-6:
        table.status = EXIT_CONVERGENCE
        table.messages.append(f"boundary residual {res:.3e} exceeds 1e-6")
    return table


COMMANDS = {
    "spectrum": cmd_spectrum,
    "profile": cmd_profile,
    "peak-scan": cmd_peak_scan,
    "kappa-table": cmd_kappa_table,
    "boundary": cmd_boundary,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mrrf", description=(
        "Spectral radiative-transport solver: eigenmode spectra, infinite-medium "
        "angular profiles, plane-wave kernels and half-space/slab boundary problems."))
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="key = value config file")
    ap.add_argument("--out", help="CSV output path (default: stdout)")
    ap.add_argument("--cache", help="decomposition cache (.npz); read if it matches, else written")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for diagonalization")
    ap.add_argument("--lmax", type=int, help="override run.l_max")
    ap.add_argument("--no-ballistic-subtraction", action="store_true",
                    help="keep the ballistic term in profiles")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command: str, values: dict, cache=None, threads=1, lmax=None,
        subtract_ballistic=True) -> Table:
    """Run a command on parsed config values; raises on failure."""
    cfg = RunConfig.from_values(values, lmax)
    if command == "boundary":
        if cfg.l_max % 2 == 0:
            raise ConfigError("boundary problems need an odd run.l_max")
        decomp = boundary_decomposition(cfg.medium, cfg.l_max, threads)
    else:
        decomp = get_decomposition(cfg, cache, threads)
    fn = COMMANDS[command]
    if command in ("profile", "peak-scan"):
        return fn(cfg, decomp, subtract_ballistic)
    return fn(cfg, decomp)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = parse_config(Path(args.config).read_text())
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        table = run(args.command, values, args.cache, args.threads, args.lmax,
                    not args.no_ballistic_subtraction)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for msg in table.messages:
        print(msg, file=sys.stderr)
    return table.status


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: instance files, cached tables and curve CSVs.

Instance file grammar (one directive per line, ``#`` starts a comment)::

    alphabet X 3 Y 3
    source 0.2 0.3 0.5
    distortion
    0 1 1
    1 0 1
    1 1 0
    units bits

or, for the two-block family::

    ahlswede sizeA 8 sizeB 512 xi 0.01 b 10
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import ahlswede as ah
from .core import LN2, Distortion, Distribution, DistortionMatrix, LumpedDistortion, validate_distribution
from .errors import ConfigurationError, DimensionMismatch, MartonError, ParseError
from .exponents import (
    blahut_exponent_curve,
    blahut_inverse_curve,
    exponent_curve,
    marton_inverse_curve,
)
from .gtable import EPS as G_EPS
from .gtable import MAX_ITR as G_MAX_ITR
from .gtable import GridSpec, GTable, LimitRow, _atomic_write, build_gtable
from .rd import EPS, MAX_ITR, TOL_DELTA, rate_distortion_batch

CACHE_ENV = "MEK_CACHE_DIR"
CACHE_VERSION = b"gtable-2"
UNITS = ("bits", "nats")


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceFile:
    """A parsed instance: an explicit ``(P, d)`` pair or an Ahlswede generator."""

    source: Distribution
    distortion: DistortionMatrix
    ahlswede: ah.AhlswedeInstance | None = None
    units: str | None = None

    def problem(self) -> tuple[np.ndarray, Distortion]:
        """``(P, d)`` for the solvers; Ahlswede instances use the lumped kernel."""
        if self.ahlswede is not None:
            return self.ahlswede.source_classes, self.ahlswede.lumped
        return self.source.probs, self.distortion

    def equivalent(self, other: "InstanceFile") -> bool:
        return (
            self.units == other.units
            and self.source == other.source
            and np.array_equal(self.distortion.values, other.distortion.values)
            and self.ahlswede == other.ahlswede
        )


_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _float(tok: str, lineno: int) -> float:
    # float() also accepts "nan", "inf" and underscores; the grammar does not.
    if not _FLOAT.match(tok):
        raise ParseError(f"not a decimal number: {tok!r}", lineno)
    return float(tok)


def _int(tok: str, lineno: int) -> int:
    if not re.fullmatch(r"\d+", tok):
        raise ParseError(f"not a nonnegative integer: {tok!r}", lineno)
    return int(tok)


def _keywords(tokens: list[str], names: tuple[str, ...], lineno: int) -> list[str]:
    if len(tokens) != 2 * len(names) or tokens[0::2] != list(names):
        raise ParseError(f"expected '{' '.join(n + ' <value>' for n in names)}'", lineno)
    return tokens[1::2]


def parse_instance_text(text: str) -> InstanceFile:
    lines = [(k + 1, raw.split("#", 1)[0].split()) for k, raw in enumerate(text.splitlines())]
    lines = [(k, toks) for k, toks in lines if toks]
    nx = ny = None
    source = None
    rows: list[np.ndarray] = []
    gen = None
    units = None
    i = 0
    while i < len(lines):
        lineno, toks = lines[i]
        head, rest = toks[0], toks[1:]
        i += 1
        if head == "alphabet":
            if nx is not None:
                raise ParseError("alphabet given twice", lineno)
            a, b = _keywords(rest, ("X", "Y"), lineno)
            nx, ny = _int(a, lineno), _int(b, lineno)
            if nx < 1 or ny < 1:
                raise ParseError("alphabet sizes must be positive", lineno)
        elif head == "source":
            if nx is None:
                raise ParseError("'source' before 'alphabet'", lineno)
            vals = [_float(t, lineno) for t in rest]
            if len(vals) != nx:
                raise DimensionMismatch(f"source has {len(vals)} values, alphabet X has {nx}", lineno)
            source = (np.array(vals), lineno)
        elif head == "distortion":
            if nx is None:
                raise ParseError("'distortion' before 'alphabet'", lineno)
            if rest:
                raise ParseError("'distortion' takes no arguments", lineno)
            for _ in range(nx):
                if i >= len(lines):
                    raise DimensionMismatch(f"distortion needs {nx} rows, got {len(rows)}", lineno)
                rl, rt = lines[i]
                i += 1
                vals = [_float(t, rl) for t in rt]
                if len(vals) != ny:
                    raise DimensionMismatch(f"row has {len(vals)} columns, alphabet Y has {ny}", rl)
                rows.append(np.array(vals))
        elif head == "ahlswede":
            a, b, xi, pen = _keywords(rest, ("sizeA", "sizeB", "xi", "b"), lineno)
            try:
                gen = ah.build_instance(_int(a, lineno), _int(b, lineno), _float(xi, lineno), _float(pen, lineno))
            except MartonError as exc:
                raise ParseError(str(exc), lineno) from exc
        elif head == "units":
            if len(rest) != 1 or rest[0] not in UNITS:
                raise ParseError("expected 'units bits' or 'units nats'", lineno)
            units = rest[0]
        else:
            raise ParseError(f"unknown directive {head!r}", lineno)

    if gen is not None:
        if nx is not None:
            raise ParseError("an ahlswede line cannot be combined with an explicit alphabet")
        return InstanceFile(gen.source, gen.d, gen, units)
    if nx is None:
        raise ParseError("missing 'alphabet' or 'ahlswede' line")
    if source is None:
        raise ParseError("missing 'source' line")
    if not rows:
        raise ParseError("missing 'distortion' block")
    return InstanceFile(validate_distribution(source[0]), DistortionMatrix(np.vstack(rows)), None, units)


def parse_instance(path) -> InstanceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_instance_text(fh.read())


def serialize_instance(inst: InstanceFile) -> str:
    out = []
    if inst.ahlswede is not None:
        a = inst.ahlswede
        out.append(f"ahlswede sizeA {a.size_a} sizeB {a.size_b} xi {a.xi!r} b {a.b!r}")
    else:
        nx, ny = inst.distortion.shape
        out.append(f"alphabet X {nx} Y {ny}")
        out.append("source " + " ".join(repr(float(v)) for v in inst.source.probs))
        out.append("distortion")
        out.extend(" ".join(repr(float(v)) for v in row) for row in inst.distortion.values)
    if inst.units is not None:
        out.append(f"units {inst.units}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

FIGURES = {
    1: {"instance": 1, "n_lambda": 10001},
    2: {"instance": 1, "n_lambda": 10001},
    3: {"instance": 1, "emin": 0.0, "emax": 1.5, "esteps": 151, "units": "bits"},
    5: {"instance": 2, "n_lambda": 10001},
    6: {"instance": 2, "n_lambda": 10001},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance: str | None = None
    figure: int | None = None
    delta: float | None = None
    emin: float = 0.0
    emax: float = 3.0
    esteps: int = 301
    rmin: float | None = None
    rmax: float | None = None
    rsteps: int = 201
    mu_max: float = 2.0
    mu_steps: int = 128
    nu_max: float = 50.0
    nu_steps: int = 256
    n_lambda: int = 2001
    eps: float = G_EPS
    max_itr: int = G_MAX_ITR
    tol_delta: float = TOL_DELTA
    units: str | None = None
    threads: int = 1
    table_cache: str | None = None
    table: str | None = None
    output: str | None = None
    kind: str = "marton"

    def __post_init__(self):
        if self.eps <= 0 or self.tol_delta <= 0 or self.max_itr < 1:
            raise ConfigurationError("tolerances must be positive")
        if self.esteps < 1 or self.rsteps < 1 or self.n_lambda < 3:
            raise ConfigurationError("ranges must be nonempty")
        if self.emax < self.emin or self.emin < 0:
            raise ConfigurationError("need 0 <= emin <= emax")
        if self.mu_steps < 1 or self.nu_steps < 1 or self.mu_max < 0 or self.nu_max < 0:
            raise ConfigurationError("grid ranges must be nonempty")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        if self.units is not None and self.units not in UNITS:
            raise ConfigurationError(f"units must be one of {UNITS}")
        if self.figure is not None and self.figure not in FIGURES:
            raise ConfigurationError(f"no preset for figure {self.figure}; choose from {sorted(FIGURES)}")
        if self.kind not in ("marton", "blahut"):
            raise ConfigurationError("kind must be 'marton' or 'blahut'")

    @property
    def grid(self) -> GridSpec:
        return GridSpec.uniform(self.mu_max, self.mu_steps, self.nu_max, self.nu_steps, 3.0, 301)


def load_instance(cfg: RunConfig) -> InstanceFile:
    if cfg.instance is not None:
        return parse_instance(cfg.instance)
    if cfg.figure is not None:
        gen = ah.instance_1() if FIGURES[cfg.figure]["instance"] == 1 else ah.instance_2()
        return InstanceFile(gen.source, gen.d, gen, "bits")
    raise ConfigurationError("need --instance or --figure")


def _units(cfg: RunConfig, inst: InstanceFile) -> str:
    return cfg.units or inst.units or "nats"


def _scale(units: str) -> float:
    """Multiply nats by this to get the display unit."""
    return 1.0 / LN2 if units == "bits" else 1.0


def _delta(cfg: RunConfig, inst: InstanceFile) -> float:
    if cfg.delta is not None:
        return cfg.delta
    if inst.ahlswede is not None:
        return inst.ahlswede.delta
    raise ConfigurationError("--delta is required for this instance")


# ---------------------------------------------------------------------------
# Table cache
# ---------------------------------------------------------------------------


def _distortion_bytes(d: Distortion) -> bytes:
    if isinstance(d, DistortionMatrix):
        return b"matrix" + np.ascontiguousarray(d.values).tobytes()
    if isinstance(d, LumpedDistortion):
        parts = (d.levels, d.counts, d.row_sizes, d.col_sizes)
        return b"lumped" + b"".join(np.ascontiguousarray(a, dtype=float).tobytes() for a in parts) + str(d.levels.shape).encode()
    raise ConfigurationError(f"cannot fingerprint {type(d).__name__}")


def table_key(p_x, d: Distortion, spec: GridSpec, eps: float, max_itr: int) -> str:
    h = hashlib.sha256(CACHE_VERSION)
    h.update(np.ascontiguousarray(p_x, dtype=float).tobytes())
    h.update(_distortion_bytes(d))
    h.update(spec.key())
    h.update(repr((float(eps), int(max_itr))).encode())
    return h.hexdigest()


def cache_dir(cfg: RunConfig) -> Path:
    if cfg.table_cache:
        return Path(cfg.table_cache)
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "marton"


def _save_npz(path: Path, table: GTable) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".npz")
    try:
        arrays = dict(g=table.g, iterations=table.iterations, converged=table.converged,
                      mu=table.mu, nu=table.nu, e=table.spec.e_ticks)
        if table.limit is not None:
            lim = table.limit
            arrays.update(g_inf=lim.g, iterations_inf=lim.iterations, converged_inf=lim.converged)
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_npz(path: Path) -> GTable:
    with np.load(path) as z:
        spec = GridSpec(z["mu"], z["nu"], z["e"])
        limit = None
        if "g_inf" in z.files:
            limit = LimitRow(z["g_inf"], z["iterations_inf"], z["converged_inf"])
        return GTable(z["g"], spec, z["iterations"], z["converged"], provenance={"source": str(path)}, limit=limit)


def get_table(cfg: RunConfig, inst: InstanceFile, log=None) -> GTable:
    """Load ``--table``, else a cached table, else build and cache one."""
    if cfg.table is not None:
        return GTable.from_csv(cfg.table)
    p_x, d = inst.problem()
    spec = cfg.grid
    path = cache_dir(cfg) / f"gtable-{table_key(p_x, d, spec, cfg.eps, cfg.max_itr)[:24]}.npz"
    if path.exists():
        return _load_npz(path)
    if log:
        log(f"building {spec.shape[0]}x{spec.shape[1]} table")
    table = build_gtable(p_x, d, spec, cfg.eps, cfg.max_itr, threads=cfg.threads)
    _save_npz(path, table)
    return table


# ---------------------------------------------------------------------------
# Curve CSV
# ---------------------------------------------------------------------------

CURVE_HEADER = ["x", "y_nats", "y_bits", "mu_opt", "nu_opt"]


def _cell(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    v = float(v)
    if math.isinf(v):
        return "" if v > 0 else "-inf"
    return f"{v:.12g}"


def _arg_cell(v) -> str:
    # An argopt at mu = inf is a real location, unlike an infinite y.
    if v is not None and math.isinf(float(v)):
        return "inf" if v > 0 else "-inf"
    return _cell(v)


def curve_csv(x, y_nats, arg=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    y_nats = np.asarray(y_nats, dtype=float)
    for k, (xv, yv) in enumerate(zip(np.asarray(x, dtype=float), y_nats)):
        mu, nu = (None, None) if arg is None else arg[k]
        w.writerow([_cell(xv), _cell(yv), _cell(yv / LN2), _arg_cell(mu), _arg_cell(nu)])
    return buf.getvalue()


def read_curve_csv(path_or_text: str, is_text: bool = False) -> dict[str, np.ndarray]:
    """Parse a curve CSV; empty cells come back as ``inf`` in y and ``nan`` in argopts."""
    text = path_or_text if is_text else Path(path_or_text).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CURVE_HEADER:
        raise ParseError("not a curve CSV", 1)
    cols: dict[str, list[float]] = {h: [] for h in CURVE_HEADER}
    for r in rows[1:]:
        for h, v in zip(CURVE_HEADER, r):
            empty = math.inf if h.startswith("y") else math.nan
            cols[h].append(float(v) if v else empty)
    return {h: np.array(v) for h, v in cols.items()}


def _emit(cfg: RunConfig, text: str, out=None) -> None:
    if cfg.output:
        _atomic_write(cfg.output, text)
    else:
        (out or sys.stdout).write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _e_ticks(cfg: RunConfig, units: str) -> np.ndarray:
    e = np.linspace(cfg.emin, cfg.emax, cfg.esteps)
    return e / _scale(units)


def cmd_rd(cfg: RunConfig, out=None) -> int:
    inst = load_instance(cfg)
    p_x, d = inst.problem()
    delta = _delta(cfg, inst)
    r, nu, _ = rate_distortion_batch(p_x, d, delta, cfg.tol_delta, EPS, MAX_ITR)
    _emit(cfg, curve_csv([delta], r, [(None, nu[0])]), out)
    return 0


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    inst = load_instance(cfg)
    if inst.ahlswede is None:
        raise ConfigurationError("sweep needs an ahlswede instance")
    sw = ah.rd_lambda_sweep(inst.ahlswede, cfg.n_lambda)
    _emit(cfg, curve_csv(sw.lam, sw.rate), out)
    return 0


def cmd_gtable(cfg: RunConfig, out=None) -> int:
    inst = load_instance(cfg)
    table = get_table(cfg, inst)
    if not cfg.output:
        raise ConfigurationError("gtable needs --output")
    table.to_csv(cfg.output)
    return 0


def _inverse(cfg: RunConfig, fn, out) -> int:
    inst = load_instance(cfg)
    units = _units(cfg, inst)
    table = get_table(cfg, inst)
    e = _e_ticks(cfg, units)
    curve = fn(table, _delta(cfg, inst), e)
    _emit(cfg, curve_csv(curve.x * _scale(units), curve.y, curve.arg), out)
    return 0


def cmd_marton_inverse(cfg: RunConfig, out=None) -> int:
    return _inverse(cfg, marton_inverse_curve, out)


def cmd_blahut_inverse(cfg: RunConfig, out=None) -> int:
    return _inverse(cfg, blahut_inverse_curve, out)


def cmd_exponent(cfg: RunConfig, out=None) -> int:
    """``E_M(R)`` by inverting the grid's ``R_M(E)``, or ``E_B(R)`` directly."""
    inst = load_instance(cfg)
    units = _units(cfg, inst)
    s = _scale(units)
    delta = _delta(cfg, inst)
    table = get_table(cfg, inst)
    inv = marton_inverse_curve(table, delta, _e_ticks(cfg, units))
    rmin = 0.0 if cfg.rmin is None else cfg.rmin / s
    rmax = float(inv.y.max()) if cfg.rmax is None else cfg.rmax / s
    if rmax < rmin:
        raise ConfigurationError("need rmin <= rmax")
    r = np.linspace(rmin, rmax, cfg.rsteps)
    if cfg.kind == "marton":
        curve = exponent_curve(inv, r)
    else:
        curve = blahut_exponent_curve(table, delta, r)
    _emit(cfg, curve_csv(curve.x * s, curve.y), out)
    return 0


def cmd_ahlswede_exact(cfg: RunConfig, out=None) -> int:
    inst = load_instance(cfg)
    if inst.ahlswede is None:
        raise ConfigurationError("ahlswede-exact needs an ahlswede instance")
    units = _units(cfg, inst)
    curve = ah.marton_exact(inst.ahlswede, cfg.n_lambda)
    _emit(cfg, curve_csv(curve.x * _scale(units), curve.y), out)
    return 0


COMMANDS = {
    "rd": cmd_rd,
    "sweep": cmd_sweep,
    "gtable": cmd_gtable,
    "marton-inverse": cmd_marton_inverse,
    "blahut-inverse": cmd_blahut_inverse,
    "exponent": cmd_exponent,
    "ahlswede-exact": cmd_ahlswede_exact,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marton", description="Rate-distortion error exponents on a (mu, nu) grid.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--instance", metavar="PATH")
    p.add_argument("--figure", type=int, metavar="K", help=f"preset for figure K in {sorted(FIGURES)}")
    p.add_argument("--delta", type=float)
    p.add_argument("--emin", type=float, default=0.0)
    p.add_argument("--emax", type=float, default=3.0)
    p.add_argument("--esteps", type=int, default=301)
    p.add_argument("--rmin", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--rsteps", type=int, default=201)
    p.add_argument("--mu-max", type=float, default=2.0)
    p.add_argument("--mu-steps", type=int, default=128)
    p.add_argument("--nu-max", type=float, default=50.0)
    p.add_argument("--nu-steps", type=int, default=256)
    p.add_argument("--n-lambda", type=int, default=2001)
    p.add_argument("--eps", type=float, default=G_EPS)
    p.add_argument("--max-itr", type=int, default=G_MAX_ITR)
    p.add_argument("--tol-delta", type=float, default=TOL_DELTA)
    u = p.add_mutually_exclusive_group()
    u.add_argument("--bits", dest="units", action="store_const", const="bits")
    u.add_argument("--nats", dest="units", action="store_const", const="nats")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--table-cache", metavar="DIR", help=f"cache directory (default ${CACHE_ENV})")
    p.add_argument("--table", metavar="CSV", help="use a table written by the gtable command")
    p.add_argument("--kind", choices=("marton", "blahut"), default="marton")
    p.add_argument("-o", "--output", metavar="PATH")
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kw = vars(ns)
    explicit = {k for k in kw if argv is not None and f"--{k.replace('_', '-')}" in argv}
    cfg = RunConfig(**kw)
    if cfg.figure is None:
        return cfg
    # Presets fill in only what was not given on the command line.
    preset = {k: v for k, v in FIGURES[cfg.figure].items() if k != "instance" and k not in explicit}
    if "units" in preset and (ns.units is not None):
        preset.pop("units")
    return replace(cfg, **preset)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = config_from_args(argv)
        return COMMANDS[cfg.command](cfg)
    except (MartonError, OSError) as exc:
        print(f"marton: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

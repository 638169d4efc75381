"""Command-line front end.

    hypsobolev COMMAND [key=value ...] [--config PATH] [--jobs K] [--out PATH] [--format csv|json]

Keys may also come from a config file (``key=value`` lines or a JSON
object); keys given on the command line win.  Numeric values accept
``pi`` expressions (``ray=pi/2``), comma lists and ``a:b:n`` log grids.

Reports start with ``#`` header lines (version, config hash, grid, fitted
constants) followed by the CSV table, or are a single JSON document.
Exit status: 0 pass, 2 a built-in check failed, 1 usage or input error.
"""
from __future__ import annotations

import argparse
import ast
import cmath
import hashlib
import io
import json
import math
import operator
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .discrete import PotentialSpec, StepProfile, assemble_L, attach_potential, build_grid, read_potential_table
from .kernels import SpectralParameter, heat_kernel_comparator, heat_kernel_exact_h3, resolvent_kernel, spectral_measure_h3
from .kunze_stein import LebesgueExponent, ks_uniformity_sweep
from .spectra import (
    check_bounds,
    eigen_report,
    numerical_range_sector,
    small_potential_scan,
    sobolev_sweep,
)

COMMANDS = ("kernel", "ks", "sobolev", "heat", "specmeasure", "eigen", "scan", "sector")
FAMILIES = ("complex-step", "gaussian", "square-well", "imaginary-step", "table")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the key and, for files, the line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)


# --------------------------------------------------------------------------
# value parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "j": 1j, "i": 1j}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        v = _eval_node(node.operand)
        return v if isinstance(node.op, ast.UAdd) else -v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> complex | float:
    try:
        v = _eval_node(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc
    if isinstance(v, complex) and v.imag == 0:
        v = v.real
    return v


def parse_real(text: str) -> float:
    v = parse_number(text)
    if isinstance(v, complex):
        raise ValueError(f"expected a real number, got {text!r}")
    return float(v)


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:b:n`` (n log-spaced points, same-sign endpoints) or ``x,y,z``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range needs a:b:n, got {text!r}")
        a, b, n = parse_real(parts[0]), parse_real(parts[1]), int(parse_real(parts[2]))
        if n < 1 or a == 0 or b == 0 or (a > 0) != (b > 0):
            raise ValueError(f"log range needs nonzero same-sign endpoints and n >= 1, got {text!r}")
        return tuple(float(x) for x in np.geomspace(a, b, n))
    return tuple(parse_real(t) for t in text.split(",") if t.strip())


# --------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    command: str = ""
    n: int = 3
    q: float | None = None
    eps: float | None = None
    R: float = 30.0
    N: int = 3000
    alpha: complex | None = None
    ray: float | None = None
    mags: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    rhos: tuple[float, ...] = ()
    ts: tuple[float, ...] = ()
    lams: tuple[float, ...] = ()
    j: int = 0
    probes: bool = True
    family: str | None = None
    depth: float = 1.0
    width: float = 1.0
    phase: float = 0.0
    table: str | None = None
    scales: tuple[float, ...] = ()
    gamma: float = 0.5
    samples: int = 10_000
    seed: int = 0
    stability: bool = True
    targets: tuple[complex, ...] = ()
    out: str | None = None
    format: str = "csv"
    jobs: int = 1

    def hash(self) -> str:
        """sha256 of the result-determining fields (output path and jobs excluded)."""
        d = asdict(self)
        for k in ("out", "jobs", "format"):
            d.pop(k)
        blob = json.dumps({k: _jsonable(v) for k, v in sorted(d.items())}, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(v):
    if isinstance(v, complex):
        return [format(v.real, ".17g"), format(v.imag, ".17g")]
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    return v


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _complex_list(text: str) -> tuple[complex, ...]:
    return tuple(complex(parse_number(t)) for t in text.split(",") if t.strip())


_PARSERS = {
    "command": str.strip, "n": lambda s: int(parse_real(s)), "q": parse_real, "eps": parse_real,
    "R": parse_real, "N": lambda s: int(parse_real(s)), "alpha": lambda s: complex(parse_number(s)),
    "ray": parse_real, "mags": parse_grid, "betas": parse_grid, "rhos": parse_grid, "ts": parse_grid,
    "lams": parse_grid, "j": lambda s: int(parse_real(s)), "probes": _as_bool, "family": str.strip,
    "depth": parse_real, "width": parse_real, "phase": parse_real, "table": str.strip,
    "scales": parse_grid, "gamma": parse_real, "samples": lambda s: int(parse_real(s)),
    "seed": lambda s: int(parse_real(s)), "stability": _as_bool, "targets": _complex_list,
    "out": str.strip, "format": str.strip, "jobs": lambda s: int(parse_real(s)),
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def _pairs_from_text(text: str, source: str) -> list[tuple[str, str, str]]:
    """(key, raw value, location) triples from key=value text or a JSON object."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON ({exc.msg})", f"{source} line {exc.lineno}") from None
        if not isinstance(doc, dict):
            raise ConfigError("JSON config must be an object", source)
        out = []
        for k, v in doc.items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append((k, str(v), f"{source} field {k!r}"))
        return out
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"expected key=value, got {token!r}", f"{source} line {lineno}")
            k, v = token.split("=", 1)
            out.append((k.strip(), v, f"{source} line {lineno}"))
    return out


def _apply(cfg: RunConfig, pairs: list[tuple[str, str, str]]) -> None:
    for key, raw, where in pairs:
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", where)
        try:
            setattr(cfg, key, _PARSERS[key](raw))
        except ValueError as exc:
            raise ConfigError(str(exc), where) from None


def parse_config(text: str, overrides: list[tuple[str, str, str]] | None = None, source: str = "config") -> RunConfig:
    """Validated RunConfig from key=value text or JSON; ``overrides`` are applied last."""
    cfg = RunConfig()
    _apply(cfg, _pairs_from_text(text, source))
    if overrides:
        _apply(cfg, overrides)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not cfg.command:
        raise ConfigError("missing required key", "command")
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {', '.join(COMMANDS)}", "command")
    if cfg.n < 2:
        raise ConfigError("dimension must be >= 2", "n")
    if cfg.R <= 0:
        raise ConfigError("must be positive", "R")
    if cfg.N < 16:
        raise ConfigError("need at least 16 grid cells", "N")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("must be csv or json", "format")
    if cfg.jobs < 1:
        raise ConfigError("must be >= 1", "jobs")
    if cfg.q is not None:
        lo = 2.0 * cfg.n / (cfg.n + 2)
        if not lo * (1 - 1e-15) <= cfg.q < 2.0:
            raise ConfigError(f"q must be in [2n/(n+2), 2) = [{lo:.6g}, 2)", "q")
    if cfg.eps is not None and cfg.eps <= 0:
        raise ConfigError("must be positive", "eps")
    need = {
        "kernel": ("alpha", "rhos"),
        "ks": ("betas",),
        "sobolev": ("q", "ray", "mags"),
        "heat": ("ts", "rhos"),
        "specmeasure": ("lams", "rhos"),
        "eigen": ("family",),
        "scan": ("family", "scales"),
        "sector": ("family",),
    }[cfg.command]
    for key in need:
        if getattr(cfg, key) in (None, ()):
            raise ConfigError(f"missing required key for {cfg.command}", key)
    if cfg.command == "ks" and (cfg.q is None) == (cfg.eps is None):
        raise ConfigError("give exactly one of q or eps", "q")
    if cfg.command == "ks" and any(b >= 0 for b in cfg.betas):
        raise ConfigError("all beta must be negative", "betas")
    if cfg.command in ("heat", "specmeasure") and cfg.n != 3:
        raise ConfigError(f"{cfg.command} is implemented for n=3", "n")
    if cfg.command == "specmeasure" and cfg.j not in (0, 1, 2):
        raise ConfigError("must be 0, 1 or 2", "j")
    if any(r <= 0 for r in cfg.rhos):
        raise ConfigError("radii must be positive", "rhos")
    if cfg.family is not None:
        if cfg.family not in FAMILIES:
            raise ConfigError(f"unknown family; choose from {', '.join(FAMILIES)}", "family")
        if cfg.family == "table" and not cfg.table:
            raise ConfigError("family=table needs table=PATH", "table")
        if cfg.width <= 0:
            raise ConfigError("must be positive", "width")
    if cfg.gamma < 0:
        raise ConfigError("must be >= 0", "gamma")
    if cfg.command == "scan" and any(b >= a for a, b in zip(cfg.scales, cfg.scales[1:])):
        raise ConfigError("scales must be strictly decreasing", "scales")
    if cfg.command == "sector" and cfg.samples < 1000:
        raise ConfigError("need at least 1000 samples", "samples")


# --------------------------------------------------------------------------
# potential families

@dataclass(frozen=True)
class GaussianProfile:
    value: complex
    width: float

    def __call__(self, rho):
        return complex(self.value) * np.exp(-((np.asarray(rho, dtype=float) / self.width) ** 2))


def build_potential(cfg: RunConfig, grid) -> PotentialSpec:
    amp = cfg.depth * cmath.exp(1j * cfg.phase)
    if cfg.family == "complex-step":
        return PotentialSpec.from_function(grid, StepProfile(amp, cfg.width), cfg.gamma)
    if cfg.family == "imaginary-step":
        return PotentialSpec.from_function(grid, StepProfile(1j * cfg.depth, cfg.width), cfg.gamma)
    if cfg.family == "square-well":
        return PotentialSpec.from_function(grid, StepProfile(-cfg.depth, cfg.width), cfg.gamma)
    if cfg.family == "gaussian":
        return PotentialSpec.from_function(grid, GaussianProfile(amp, cfg.width), cfg.gamma)
    return read_potential_table(cfg.table, grid, cfg.gamma)


# --------------------------------------------------------------------------
# reports

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


@dataclass
class Report:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    passed: bool = True
    extra: dict = field(default_factory=dict)


def render_csv(cfg: RunConfig, rep: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# hypsobolev {__version__}\n")
    buf.write(f"# config_sha256 {cfg.hash()}\n")
    buf.write(f"# command {cfg.command} n={cfg.n} R={fmt(cfg.R)} N={cfg.N}\n")
    for k in sorted(rep.constants):
        buf.write(f"# {k} {fmt(rep.constants[k])}\n")
    buf.write(f"# status {'pass' if rep.passed else 'fail'}\n")
    buf.write(",".join(rep.columns) + "\n")
    for row in rep.rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def render_json(cfg: RunConfig, rep: Report) -> str:
    doc = {
        "version": __version__,
        "config_sha256": cfg.hash(),
        "command": cfg.command,
        "grid": {"n": cfg.n, "R": cfg.R, "N": cfg.N},
        "constants": {k: _json_num(v) for k, v in sorted(rep.constants.items())},
        "status": "pass" if rep.passed else "fail",
        "columns": list(rep.columns),
        "rows": [[_json_num(v) for v in row] for row in rep.rows],
    }
    doc.update(rep.extra)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _json_num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str):
        return v
    v = float(v)
    return v if math.isfinite(v) else str(v)


# --------------------------------------------------------------------------
# commands

def _cmd_kernel(cfg: RunConfig) -> Report:
    sp = SpectralParameter.from_alpha(cfg.alpha)
    vals = resolvent_kernel(cfg.n, sp, np.asarray(cfg.rhos))
    rep = Report(("rho", "re", "im"))
    rep.rows = [(r, v.real, v.imag) for r, v in zip(cfg.rhos, np.atleast_1d(vals))]
    rep.constants = {"alpha_re": sp.alpha.real, "alpha_im": sp.alpha.imag}
    return rep


def _cmd_ks(cfg: RunConfig) -> Report:
    q = LebesgueExponent(cfg.q) if cfg.q is not None else LebesgueExponent.from_eps(cfg.eps)
    res = ks_uniformity_sweep(cfg.n, q, cfg.betas, jobs=cfg.jobs)
    rep = Report(("beta", "value", "quadrature_error", "rho_max", "diverged"))
    rep.rows = [(b, k.value, k.quadrature_error, k.tail_truncation, k.diverged) for b, k in res.rows]
    rep.constants = {"q": q.q, "eps": q.eps, "sup": res.sup, "argmax_beta": res.argmax}
    rep.passed = not res.diverged and all(k.relative_error < 1e-6 for _, k in res.rows)
    return rep


def _cmd_sobolev(cfg: RunConfig) -> Report:
    grid = build_grid(cfg.n, cfg.R, cfg.N) if cfg.probes else None
    q = LebesgueExponent(cfg.q)
    sw = sobolev_sweep(cfg.n, q, cfg.ray, cfg.mags, grid=grid, jobs=cfg.jobs)
    pred = sw.predicted_slope
    rep = Report(("mag", "re_alpha", "im_alpha", "ks_upper", "probe_lower", "regime", "predicted_exp"))
    rep.rows = [(abs(r.alpha), r.alpha.real, r.alpha.imag, r.ks_upper, r.probe_lower, r.regime, pred) for r in sw.rows]
    e1, e2 = sw.exponents
    rep.constants = {"q": cfg.q, "ray": cfg.ray, "ks_slope": sw.ks_slope, "probe_slope": sw.probe_slope,
                     "exp_high_q": e1, "exp_low_q": e2, "sandwich_constant": sw.sandwich_constant}
    rep.passed = math.isfinite(sw.ks_slope) and abs(sw.ks_slope - pred) <= 0.1
    return rep


def _cmd_heat(cfg: RunConfig) -> Report:
    rep = Report(("t", "rho", "exact", "comparator", "ratio"))
    ratios = []
    for t in cfg.ts:
        for r in cfg.rhos:
            ex = heat_kernel_exact_h3(t, r)
            cm = heat_kernel_comparator(3, t, r)
            ratio = math.exp(heat_kernel_exact_h3(t, r, log=True) - heat_kernel_comparator(3, t, r, log=True))
            ratios.append(ratio)
            rep.rows.append((t, r, ex, cm, ratio))
    c1, c2 = min(ratios), max(ratios)
    rep.constants = {"c1": c1, "c2": c2, "c2_over_c1": c2 / c1}
    rep.passed = c2 / c1 < 100
    return rep


def _envelope(lam, rho, j):
    if rho <= 1:
        return lam ** (2 - j) * (1 + rho * lam) ** (j - 1)
    return lam * rho**j * math.exp(-rho)


def _cmd_specmeasure(cfg: RunConfig) -> Report:
    rep = Report(("lam", "rho", "j", "value", "envelope", "ratio"))
    worst = 0.0
    for lam in cfg.lams:
        for r in cfg.rhos:
            v = spectral_measure_h3(lam, r, cfg.j)
            env = _envelope(lam, r, cfg.j)
            worst = max(worst, abs(v) / env)
            rep.rows.append((lam, r, cfg.j, v, env, abs(v) / env))
    rep.constants = {"fitted_C": worst}
    return rep


def _eigen_grid(cfg: RunConfig):
    return build_grid(cfg.n, cfg.R, cfg.N)


def _potential_block(V: PotentialSpec) -> dict:
    return {"potential": {"rho": [float(x) for x in V.grid.nodes],
                          "re": [float(x) for x in V.samples.real],
                          "im": [float(x) for x in V.samples.imag]}}


def _cmd_eigen(cfg: RunConfig) -> Report:
    grid = _eigen_grid(cfg)
    V = build_potential(cfg, grid)
    report = eigen_report(V, stability=cfg.stability, targets=cfg.targets or None)
    residuals = report.residuals
    genuine = set(complex(z) for z in report.genuine)
    rep = Report(("re", "im", "genuine", "residual"))
    rep.rows = [(z.real, z.imag, complex(z) in genuine, r) for z, r in zip(report.eigenvalues, residuals)]
    short = check_bounds(report, min(cfg.gamma, 0.5))
    long_ = check_bounds(report, max(cfg.gamma, 0.5))
    rep.constants = {"artifact_band": report.band, "genuine_count": len(genuine), "potential_norm": V.norm,
                     "r_short_max": short.max_ratio, "r_long_max": long_.max_ratio}
    rs, rl = report.ratios(cfg.gamma)
    rep.extra = {
        "eigenvalues": [[float(z.real), float(z.imag)] for z in report.eigenvalues],
        "genuine": [[float(z.real), float(z.imag)] for z in report.genuine],
        "ratios": {"gamma": cfg.gamma, "r_short": [float(x) for x in rs], "r_long": [float(x) for x in rl]},
        "artifact_band": report.band,
        **_potential_block(V),
    }
    rep.passed = bool(np.all(residuals < 1e-8))
    return rep


def _cmd_scan(cfg: RunConfig) -> Report:
    grid = _eigen_grid(cfg)
    V = build_potential(cfg, grid)
    res = small_potential_scan(V, cfg.scales, jobs=cfg.jobs)
    rep = Report(("scale", "genuine_count"))
    rep.rows = list(zip(res.scales, res.genuine_counts))
    rep.constants = {"found": res.found, "monotone": res.monotone,
                     "s_star": res.s_star if res.s_star is not None else float("nan")}
    rep.passed = res.found and res.monotone
    return rep


def _cmd_sector(cfg: RunConfig) -> Report:
    grid = _eigen_grid(cfg)
    V = build_potential(cfg, grid)
    M = attach_potential(assemble_L(cfg.n, grid), V)
    est = numerical_range_sector(M, cfg.samples, seed=cfg.seed)
    rep = Report(("vertex", "theta", "sample_count", "failed"))
    rep.rows = [(est.vertex, est.theta, est.sample_count, est.failed)]
    rep.constants = {"vertex": est.vertex, "theta": est.theta, "p": V.p}
    rep.passed = not est.failed
    return rep


_DISPATCH = {"kernel": _cmd_kernel, "ks": _cmd_ks, "sobolev": _cmd_sobolev, "heat": _cmd_heat,
             "specmeasure": _cmd_specmeasure, "eigen": _cmd_eigen, "scan": _cmd_scan, "sector": _cmd_sector}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a validated config; returns (exit status, rendered report)."""
    rep = _DISPATCH[cfg.command](cfg)
    text = render_json(cfg, rep) if cfg.format == "json" else render_csv(cfg, rep)
    return (0 if rep.passed else 2), text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypsobolev", description="Resolvent, Kunze-Stein and eigenvalue checks on hyperbolic space.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("settings", nargs="*", metavar="key=value")
    p.add_argument("--config", type=Path, help="key=value or JSON config file")
    p.add_argument("--jobs", type=int, help="worker processes for sweeps")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        overrides = [("command", args.command, "argv")]
        for token in args.settings:
            if "=" not in token:
                raise ConfigError(f"expected key=value, got {token!r}", "argv")
            k, v = token.split("=", 1)
            overrides.append((k, v, f"argv {k!r}"))
        for key in ("jobs", "out", "format"):
            val = getattr(args, key)
            if val is not None:
                overrides.append((key, str(val), f"--{key}"))
        cfg = parse_config(text, overrides, source=str(args.config or "config"))
    except (ConfigError, OSError) as exc:
        print(f"hypsobolev: error: {exc}", file=sys.stderr)
        return 1
    try:
        status, report = run(cfg)
    except (ValueError, ArithmeticError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": cfg.command}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1
    if cfg.out:
        Path(cfg.out).write_text(report, encoding="utf-8")
    else:
        try:
            sys.stdout.write(report)
            sys.stdout.flush()
        except BrokenPipeError:
            sys.stderr.close()
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

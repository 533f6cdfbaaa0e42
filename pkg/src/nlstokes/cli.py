"""Command line front end: ``nlstokes <command> [--config FILE] [--KEY VALUE ...]``.

A run is described by one flat JSON document.  Command-line flags override
its keys one by one (``--delta 0.5``, ``--deltas "[0.2, 0.1]"``).  Every run
writes CSV artifacts into ``--out`` and prints one JSON status line: on
stdout for success, on stderr for failure.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
3 ill-posed problem, 4 NaN in an artifact, 5 a validation check failed.
"""

import argparse
from dataclasses import dataclass, field
import json
import math
import os
import sys

import numpy as np

from . import grid1d as g1
from .convergence import (REPORT_COLUMNS, RateStudy, asymptotic_compatibility_study,
                          delta_refinement_study, modified_gap_study,
                          spectral_refinement_study)
from .forcing import FORCING_KINDS, make_forcing, rng
from .io import write_csv
from .kernels import (KINDS, DivergentMomentError, KernelError, RadialProfile, ScaledKernel,
                      check_gradient_monotonicity, kernel_moment, normalize_profile)
from .realspace import RULES, LatticeField, adjointness_residual, planewave_symbol_check
from .spectral import VARIANTS, IllPosedError, PeriodicGrid, SpectralError, StokesProblem, solve_stokes
from .symbols import (SYMBOL_COLUMNS, SymbolCache, b_symbol, lambda_symbol, refine_root,
                      scan_b_zero_crossings, symbol_table)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_ILL_POSED, EXIT_NAN, EXIT_CHECK = range(6)

COMMANDS = ("kernels", "symbols", "scan", "solve", "converge", "grid1d", "validate")
STUDIES = ("delta", "spectral", "asymptotic", "modified")
KERNEL_KEYS = ("kind", "beta", "sigma", "epsilon", "role", "dim")
# fractional exponents this close to the divergence limit lose quadrature accuracy
BETA_MARGIN = 0.1
ADJOINT_TOL = 1e-12

_COMMON = {"command", "dim", "seed", "threads", "out"}
_KERNEL_SLOTS = {"diffusion", "gradient", "beta"}
ALLOWED_KEYS = {
    "kernels": _COMMON | _KERNEL_SLOTS | {"delta", "samples"},
    "symbols": _COMMON | _KERNEL_SLOTS | {"delta", "xi_max", "samples"},
    "scan": _COMMON | {"gradient", "beta", "delta", "xi_max", "samples", "refine"},
    "solve": _COMMON | _KERNEL_SLOTS | {"delta", "N", "nu", "variant", "forcing", "export_grid"},
    "converge": _COMMON | _KERNEL_SLOTS | {"study", "delta", "deltas", "N", "Ns", "N_ref",
                                           "nu", "forcing"},
    "grid1d": _COMMON | {"gradient", "beta", "delta", "N"},
    "validate": _COMMON | _KERNEL_SLOTS | {"delta", "Ns", "xi", "pairs", "rule"},
}

DEFAULTS = {
    "kernels": {"delta": 1.0, "samples": 64},
    "symbols": {"delta": 1.0, "xi_max": 60.0, "samples": 512},
    "scan": {"delta": 1.0, "xi_max": 60.0, "samples": 512, "refine": True},
    "solve": {"delta": 0.1, "N": 32, "nu": 1.0, "variant": "nonlocal",
              "forcing": {"kind": "taylor_green"}, "export_grid": False},
    "converge": {"study": "delta", "nu": 1.0, "forcing": {"kind": "taylor_green"}},
    "grid1d": {"delta": 0.5, "N": 32},
    "validate": {"delta": 0.4, "Ns": [32, 64, 128], "pairs": 20, "rule": "volume"},
}
CONVERGE_DEFAULTS = {
    "delta": {"deltas": [0.2, 0.1, 0.05, 0.025], "N": 64},
    "modified": {"deltas": [0.2, 0.1, 0.05, 0.025], "N": 64},
    "spectral": {"delta": 0.1, "Ns": [8, 16, 32, 64]},
    "asymptotic": {"Ns": [16, 32, 64, 128]},
}
DEFAULT_KERNELS = {
    "diffusion": {"kind": "constant"},
    "gradient": {"kind": "fractional", "beta": 0.5},
}
GRID1D_KERNEL = {"kind": "constant"}


class ConfigError(ValueError):
    """All validation errors of a configuration document."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    command: str
    dim: int = 2
    seed: int = 0
    threads: int = 1
    out: str = "."
    diffusion: RadialProfile | None = None
    gradient: RadialProfile | None = None
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_even_N(v, name, errors, minimum=4):
    if not _is_int(v) or v < minimum:
        errors.append(f"{name} must be an integer >= {minimum}, got {v!r}")
    elif v % 2:
        errors.append(f"{name} must be even, got {v}")


def _parse_kernel(spec, role, dim, errors):
    """RadialProfile from a kernel mapping; problems are appended to ``errors``."""
    if not isinstance(spec, dict):
        errors.append(f"{role} kernel must be a mapping")
        return None
    unknown = sorted(set(spec) - set(KERNEL_KEYS))
    if unknown:
        errors.append(f"{role} kernel: unknown keys {unknown}")
    kind = spec.get("kind")
    if kind not in KINDS:
        errors.append(f"{role} kernel: unknown kernel kind {kind!r}")
        return None
    if spec.get("role", role) != role:
        errors.append(f"{role} kernel: role {spec['role']!r} does not match its slot")
    if "dim" in spec and spec["dim"] != dim:
        errors.append(f"{role} kernel: dim {spec['dim']!r} differs from run dim {dim}")
    kw = {}
    for key in ("beta", "sigma", "epsilon"):
        if key in spec:
            if not _is_num(spec[key]):
                errors.append(f"{role} kernel: {key} must be a finite number")
                return None
            kw[key] = float(spec[key])
    try:
        profile = RadialProfile(kind, 1.0, role, **kw)
    except KernelError as exc:
        errors.append(f"{role} kernel: {exc}")
        return None
    if profile.admissibility == "divergent":
        errors.append(f"{role} kernel: divergent moment (beta={profile.beta:g})")
        return None
    limit = 1.0 if role == "gradient" else 2.0
    if profile.singular and profile.beta > limit - BETA_MARGIN:
        errors.append(f"{role} kernel: beta={profile.beta:g} outside evaluable range "
                      f"(beta <= {limit - BETA_MARGIN:g})")
        return None
    try:
        return normalize_profile(profile, dim)
    except DivergentMomentError:
        errors.append(f"{role} kernel: divergent moment")
    except KernelError as exc:
        errors.append(f"{role} kernel: {exc}")
    return None


def parse_config(text, command=None, overrides=None):
    """Validate a JSON document (text or mapping) into an ExperimentConfig.

    Raises
    ------
    ConfigError
        With every problem found, not only the first.
    """
    if isinstance(text, dict):
        doc = dict(text)
    else:
        try:
            doc = json.loads(text) if text and text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed config document: {exc}"]) from None
        if not isinstance(doc, dict):
            raise ConfigError(["config document must be a JSON object"])
    doc.update(overrides or {})
    errors = []
    if command is not None:
        if doc.get("command", command) != command:
            errors.append(f"config is for {doc['command']!r}, not {command!r}")
        doc["command"] = command
    command = doc.get("command")
    if command not in COMMANDS:
        raise ConfigError(errors + [f"unknown command {command!r}"])

    unknown = sorted(set(doc) - ALLOWED_KEYS[command])
    if unknown:
        errors.append(f"unknown keys for {command}: {unknown}")

    p = dict(DEFAULTS[command])
    if command == "converge":
        study = doc.get("study", "delta")
        if study not in STUDIES:
            errors.append(f"unknown study {study!r}")
        else:
            p.update(CONVERGE_DEFAULTS[study])
            if study == "asymptotic" and "deltas" not in doc:
                ns = doc.get("Ns", p["Ns"])
                if isinstance(ns, list) and all(_is_int(n) and n > 0 for n in ns):
                    p["deltas"] = [1.0 / n for n in ns]
    p.update({k: v for k, v in doc.items() if k not in _COMMON | _KERNEL_SLOTS})

    dim = doc.get("dim", 1 if command == "grid1d" else 2)
    if dim not in (1, 2, 3) or not _is_int(dim):
        errors.append(f"dim must be 1, 2 or 3, got {dim!r}")
        dim = 2
    if command == "grid1d" and dim != 1:
        errors.append("grid1d runs in dim 1")
    if command in ("solve", "converge", "validate") and dim == 1:
        errors.append(f"{command} needs dim 2 or 3")
    seed = doc.get("seed", 0)
    if not _is_int(seed) or not 0 <= seed < 2**64:
        errors.append(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        seed = 0
    threads = doc.get("threads", 1)
    if not _is_int(threads) or threads < 1:
        errors.append(f"threads must be a positive integer, got {threads!r}")
        threads = 1
    out = doc.get("out", ".")
    if not isinstance(out, str) or not out:
        errors.append("out must be a directory path")

    # scalar checks
    for key in ("delta", "nu", "xi_max"):
        if key in p and (not _is_num(p[key]) or p[key] <= 0):
            errors.append(f"{key} must be a positive number, got {p[key]!r}")
    if "samples" in p and (not _is_int(p["samples"]) or p["samples"] < (64 if command == "scan" else 1)):
        errors.append(f"samples must be an integer >= {64 if command == 'scan' else 1}")
    if "N" in p:
        _check_even_N(p["N"], "N", errors, 2 if command == "grid1d" else 4)
    if "N_ref" in p and p["N_ref"] is not None:
        _check_even_N(p["N_ref"], "N_ref", errors)
    if "Ns" in p:
        if not isinstance(p["Ns"], list) or not p["Ns"]:
            errors.append("Ns must be a non-empty list")
        else:
            for n in p["Ns"]:
                _check_even_N(n, "each N in Ns", errors)
    if "deltas" in p:
        if not isinstance(p["deltas"], list) or not p["deltas"] or \
                not all(_is_num(d) and d > 0 for d in p["deltas"]):
            errors.append("deltas must be a non-empty list of positive numbers")
    if p.get("variant", "nonlocal") not in VARIANTS:
        errors.append(f"unknown variant {p['variant']!r}")
    if p.get("rule", "volume") not in RULES:
        errors.append(f"unknown stencil rule {p['rule']!r}")
    if "pairs" in p and (not _is_int(p["pairs"]) or p["pairs"] < 1):
        errors.append("pairs must be a positive integer")
    for key in ("export_grid", "refine"):
        if key in p and not isinstance(p[key], bool):
            errors.append(f"{key} must be true or false")
    if "forcing" in p:
        f = p["forcing"]
        if not isinstance(f, dict) or f.get("kind", "taylor_green") not in FORCING_KINDS:
            errors.append(f"forcing kind must be one of {list(FORCING_KINDS)}")
    if command == "validate":
        xi = p.setdefault("xi", [1] + [0] * (dim - 1))
        if not isinstance(xi, list) or len(xi) != dim or not all(_is_int(v) for v in xi):
            errors.append(f"xi must be a list of {dim} integers")
    if command == "converge" and p.get("study") == "asymptotic":
        if isinstance(p.get("deltas"), list) and isinstance(p.get("Ns"), list) and \
                len(p["deltas"]) != len(p["Ns"]):
            errors.append("asymptotic path needs as many deltas as Ns")

    # kernels
    if "beta" in doc and "gradient" in doc:
        errors.append("give either beta or a gradient kernel, not both")
    if "beta" in doc and not _is_num(doc["beta"]):
        errors.append("beta must be a finite number")
    specs = {}
    for role in ("diffusion", "gradient"):
        needed = role == "gradient" or command not in ("scan", "grid1d")
        if not needed:
            continue
        if role == "gradient" and "beta" in doc and _is_num(doc["beta"]):
            specs[role] = {"kind": "fractional", "beta": doc["beta"]}
        elif role in doc:
            specs[role] = doc[role]
        elif command == "grid1d":
            specs[role] = GRID1D_KERNEL
        elif command == "validate":
            specs[role] = {"kind": "constant"}
        else:
            specs[role] = DEFAULT_KERNELS[role]
    profiles = {role: _parse_kernel(s, role, dim, errors) for role, s in specs.items()}

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(command, dim, seed, threads, out,
                            profiles.get("diffusion"), profiles.get("gradient"), p)


# ---------------------------------------------------------------- commands

def _path(cfg, name):
    return os.path.join(cfg.out, name)


def _run_kernels(cfg):
    rows, prof_rows = [], []
    delta, n = cfg["delta"], cfg["samples"]
    r = delta * np.arange(1, n + 1) / n
    kernels = {}
    for role in ("diffusion", "gradient"):
        p = getattr(cfg, role)
        mono = check_gradient_monotonicity(p, cfg.dim).passed if role == "gradient" else None
        rows.append((role, p.kind, p.beta, p.sigma, p.epsilon if p.kind == "piecewise_fractional"
                     else None, cfg.dim, p.amplitude, kernel_moment(p, cfg.dim),
                     p.admissibility, mono))
        kernels[role] = ScaledKernel(p, delta, cfg.dim)(r)
    prof_rows = list(zip(r.tolist(), kernels["diffusion"].tolist(), kernels["gradient"].tolist()))
    nan = write_csv(rows, ("role", "kind", "beta", "sigma", "epsilon", "dim", "amplitude",
                           "moment", "admissibility", "monotone"), _path(cfg, "kernels.csv"))
    nan |= write_csv(prof_rows, ("r", "omega_diffusion", "omega_gradient"),
                     _path(cfg, "kernel_profiles.csv"))
    return {"artifacts": ["kernels.csv", "kernel_profiles.csv"]}, nan


def _run_symbols(cfg):
    xi = cfg["xi_max"] * np.arange(1, cfg["samples"] + 1) / cfg["samples"]
    table = symbol_table(cfg.diffusion, cfg.gradient, cfg.dim, cfg["delta"], xi, cfg.threads)
    nan = write_csv(table.rows(), SYMBOL_COLUMNS, _path(cfg, "symbols.csv"))
    return {"artifacts": ["symbols.csv"], "quadrature": table.quadrature}, nan


def _run_scan(cfg):
    k = ScaledKernel(cfg.gradient, cfg["delta"], cfg.dim)
    rep = scan_b_zero_crossings(k, cfg["xi_max"], cfg["samples"], refine=cfg["refine"])
    roots = []
    for lo, hi in rep.brackets:
        roots.append((lo, hi, refine_root(k, (lo, hi)) if cfg["refine"] and lo < hi else None))
    nan = write_csv(zip(rep.xi.tolist(), rep.b.tolist()), ("xi", "b"), _path(cfg, "scan.csv"))
    nan |= write_csv(roots, ("lo", "hi", "root"), _path(cfg, "scan_brackets.csv"))
    return {"artifacts": ["scan.csv", "scan_brackets.csv"], "crossings": len(roots),
            "near_zero": rep.near_zero, "positive": rep.positive}, nan


def _solution_rows(sol):
    g = sol.velocity.grid
    rows = []
    for xi in g.sorted_modes():
        idx = g.index_of(xi)
        u = sol.velocity.coeffs[(slice(None),) + idx]
        p = sol.pressure.coeffs[(0,) + idx]
        if np.any(u != 0) or p != 0:
            vals = [int(v) for v in xi]
            for c in u:
                vals += [c.real, c.imag]
            rows.append(tuple(vals + [p.real, p.imag]))
    return rows


def _run_solve(cfg):
    grid = PeriodicGrid(cfg.dim, cfg["N"])
    f = make_forcing(cfg["forcing"], grid, cfg["nu"], cfg.seed)
    if cfg["variant"] == "local":
        prob = StokesProblem(f, cfg["nu"], "local")
    else:
        prob = StokesProblem(f, cfg["nu"], cfg["variant"], symbols=SymbolCache(
            ScaledKernel(cfg.diffusion, cfg["delta"], cfg.dim),
            ScaledKernel(cfg.gradient, cfg["delta"], cfg.dim)))
    sol = solve_stokes(prob)                      # may raise IllPosedError before any write
    d = cfg.dim
    cols = [f"xi{j + 1}" for j in range(d)]
    for j in range(d):
        cols += [f"re_u{j + 1}", f"im_u{j + 1}"]
    cols += ["re_p", "im_p"]
    nan = write_csv(_solution_rows(sol), cols, _path(cfg, "solution.csv"))
    artifacts = ["solution.csv"]
    if cfg["export_grid"]:
        x = grid.points().reshape(d, -1)
        u = sol.velocity.to_real().reshape(d, -1)
        p = sol.pressure.to_real().reshape(-1)
        rows = zip(*x.tolist(), *u.tolist(), p.tolist())
        names = [f"x{j + 1}" for j in range(d)] + [f"u{j + 1}" for j in range(d)] + ["p"]
        nan |= write_csv(rows, names, _path(cfg, "solution_grid.csv"))
        artifacts.append("solution_grid.csv")
    return {"artifacts": artifacts, "residual": sol.residual, "div_local": sol.div_local,
            "div_nonlocal": sol.div_nonlocal}, nan


def _run_converge(cfg):
    study = cfg["study"]
    rs = RateStudy(cfg.diffusion, cfg.gradient, cfg.dim, cfg["nu"], cfg["forcing"],
                   deltas=cfg.get("deltas"), Ns=cfg.get("Ns"), delta=cfg.get("delta"),
                   N=cfg.get("N"), N_ref=cfg.get("N_ref"), seed=cfg.seed, workers=cfg.threads)
    runner = {"delta": delta_refinement_study, "spectral": spectral_refinement_study,
              "asymptotic": asymptotic_compatibility_study, "modified": modified_gap_study}[study]
    rep = runner(rs)
    nan = write_csv(rep.rows(), REPORT_COLUMNS, _path(cfg, "rates.csv"))
    return {"artifacts": ["rates.csv"], "reference": rep.reference, "flags": rep.flags}, nan


def _run_grid1d(cfg):
    k = ScaledKernel(cfg.gradient, cfg["delta"], 1)
    reg = g1.build_weights(k, N=cfg["N"], layout="regular")
    stag = g1.build_weights(k, N=cfg["N"], layout="staggered")
    nan = write_csv(g1.symbol_rows(reg, stag), g1.GRID1D_COLUMNS, _path(cfg, "grid1d.csv"))
    audits = {}
    for name, disc in (("regular", reg), ("staggered", stag)):
        a = g1.nyquist_audit(disc)
        audits[name] = {"min": a.minimum, "max": a.maximum, "n": a.location,
                        "verdict": a.verdict}
    return {"artifacts": ["grid1d.csv"], "audit": audits}, nan


def _run_validate(cfg):
    delta, Ns, dim = cfg["delta"], cfg["Ns"], cfg.dim
    gk = ScaledKernel(cfg.gradient, delta, dim)
    dk = ScaledKernel(cfg.diffusion, delta, dim)
    grid = PeriodicGrid(dim, Ns[0])
    g = rng(cfg.seed)
    worst = 0.0
    for _ in range(cfg["pairs"]):
        u = LatticeField(grid, g.standard_normal((dim,) + grid.shape))
        p = LatticeField(grid, g.standard_normal(grid.shape))
        worst = max(worst, adjointness_residual(u, p, gk, rule=cfg["rule"]))
    rows = [("adjointness", "G/D", Ns[0], worst, None)]
    xi = cfg["xi"]
    kmag = float(np.linalg.norm(xi))
    for op, k, symbol in (("L", dk, lambda_symbol), ("G", gk, b_symbol)):
        ref = symbol(k, kmag) if kmag > 0 else 0.0
        prev = None
        for n in Ns:
            dev = planewave_symbol_check(op, k, xi, n, ref, rule=cfg["rule"])
            order = math.log(prev[1] / dev) / math.log(n / prev[0]) \
                if prev and prev[1] > 0 and dev > 0 else None
            rows.append(("planewave", op, n, dev, order))
            prev = (n, dev)
    nan = write_csv(rows, ("check", "op", "N", "value", "order"), _path(cfg, "validate.csv"))
    info = {"artifacts": ["validate.csv"], "adjointness": worst}
    if worst > ADJOINT_TOL:
        info["check_failed"] = f"adjointness residual {worst:.3g} > {ADJOINT_TOL:g}"
    return info, nan


RUNNERS = {"kernels": _run_kernels, "symbols": _run_symbols, "scan": _run_scan,
           "solve": _run_solve, "converge": _run_converge, "grid1d": _run_grid1d,
           "validate": _run_validate}


def _emit(stream, payload):
    stream.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
    stream.flush()


def run_command(cfg, stdout=None, stderr=None):
    """Execute a validated config; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        os.makedirs(cfg.out, exist_ok=True)
        info, nan = RUNNERS[cfg.command](cfg)
    except IllPosedError as exc:
        _emit(stderr, {"status": "error", "code": "ill-posed", "command": cfg.command,
                       "message": str(exc), "modes": exc.modes})
        return EXIT_ILL_POSED
    except (SpectralError, KernelError, ValueError, RuntimeError, OSError) as exc:
        _emit(stderr, {"status": "error", "code": type(exc).__name__, "command": cfg.command,
                       "message": str(exc)})
        return EXIT_FAILURE
    info = {"status": "ok", "command": cfg.command, **info}
    if nan:
        info["status"] = "nan"
        _emit(stderr, {"status": "error", "code": "nan", "command": cfg.command,
                       "message": "NaN written to an artifact"})
        _emit(stdout, info)
        return EXIT_NAN
    if "check_failed" in info:
        info["status"] = "check-failed"
        _emit(stdout, info)
        return EXIT_CHECK
    _emit(stdout, info)
    return EXIT_OK


_OVERRIDES = ("dim", "delta", "deltas", "N", "Ns", "N_ref", "nu", "beta", "variant", "study",
              "samples", "xi_max", "refine", "export_grid", "xi", "pairs", "rule",
              "forcing", "diffusion", "gradient")


def _flag_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser():
    parser = argparse.ArgumentParser(prog="nlstokes", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config document")
    parser.add_argument("--out", help="output directory for CSV artifacts")
    parser.add_argument("--threads", type=int, help="worker cap")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    for key in _OVERRIDES:
        parser.add_argument(f"--{key}", type=_flag_value, metavar="VALUE",
                            help=f"override the {key!r} config key (JSON value)")
    return parser


def main(argv=None, stdout=None, stderr=None):
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            _emit(stderr, {"status": "error", "code": "config", "errors": [str(exc)]})
            return EXIT_CONFIG
    overrides = {k: getattr(args, k) for k in ("out", "threads", "seed") + _OVERRIDES
                 if getattr(args, k) is not None}
    try:
        cfg = parse_config(text, args.command, overrides)
    except ConfigError as exc:
        _emit(stderr, {"status": "error", "code": "config", "errors": exc.errors})
        return EXIT_CONFIG
    return run_command(cfg, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())

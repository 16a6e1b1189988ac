"""Command-line front end.

Each subcommand reads options from an optional JSON config (``--config``)
and from flags; flags win over config keys, which win over built-in
defaults.  Relative paths in a config are resolved against the config's
directory.  Exit codes: 0 success, 2 invalid input, 3 solver failure.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, IoError, SolverError, ValidationError

# option tables ---------------------------------------------------------------
# name -> (type, default, help); type "in"/"out" mark input/output paths.

COMMON = {
    "seed": (int, 0, "seed recorded in the output and used by seeded families"),
    "threads": (int, None, "worker threads (default: OTLAB_THREADS or logical cores)"),
    "timings": (bool, False, "include wall-clock timings in JSON output"),
    "json": (bool, False, "print the JSON result to stdout"),
    "json_out": ("out", None, "write the JSON result to this file"),
}

BACKEND = {
    "backend": (str, "exact", "exact or sinkhorn"),
    "eps": (float, None, "entropic regularisation (default: squared grid spacing)"),
    "tol": (float, 1e-9, "Sinkhorn marginal tolerance"),
}

OPTIONS = {
    "d2": {"mu": ("in", None, "source density file"), "nu": ("in", None, "target density file"),
           **BACKEND, "debias": (bool, None, "subtract self-transport costs (sinkhorn)")},
    "path": {"kind": (str, "geodesic", "geodesic, linear or multiplicative"),
             "f0": ("in", None, "start density"), "f1": ("in", None, "end density"),
             "h": ("in", None, "perturbation field (multiplicative paths)"),
             "t": (float, 0.5, "path parameter"), "out": ("out", None, "slice output file"),
             "eps": (float, None, "entropic regularisation for 2D geodesics"),
             "tol": (float, 1e-9, "Sinkhorn marginal tolerance")},
    "response": {"path_f": (str, None, "source path as 'start.dat[,end.dat]'"),
                 "path_g": (str, None, "target path as 'start.dat[,end.dat]'"),
                 "diag": ("out", None, "diagnostics JSON file"),
                 "f0": ("in", None, "source path start"),
                 "f1": ("in", None, "source path end (omit for a constant source)"),
                 "g0": ("in", None, "target path start"),
                 "g1": ("in", None, "target path end (omit for a constant target)"),
                 "t": (float, 0.5, "path parameter"), "out": ("out", None, "response output file"),
                 "eps": (float, None, "entropic regularisation for 2D potentials"),
                 "tol": (float, 1e-9, "Sinkhorn marginal tolerance")},
    "second-variation": {"f": ("in", None, "source density"), "g": ("in", None, "target density"),
                         "h": ("in", None, "source perturbation field"),
                         "k": ("in", None, "target perturbation field"),
                         "center": (bool, False, "subtract weighted means of h and k"),
                         "dt": (float, 1e-2, "finite-difference step"),
                         "half_step": (bool, False, "also report the step dt/2"),
                         **BACKEND, "out": ("out", None, "report JSON file")},
    "stability": {"theorem": (str, None, "1.1, 1.2 or 1.3"),
                  "family": (str, None, "translation, multiplicative, piecewise or smooth"),
                  "family_params": (dict, None, "extra family parameters (config only)"),
                  "alpha": (float, 0.5, "Hölder order for 1.3"),
                  "backend": (str, "exact", "exact"),
                  "csv": ("out", None, "CSV output"), "svg": ("out", None, "SVG output")},
    "sharpness": {"p": (float, 2.0, "vanishing order p > 1"),
                  "eta": (float, 0.9, "trial Hölder exponent"),
                  "eps": (list, [1e-1, 1e-2, 1e-3, 1e-4], "comma-separated eps values"),
                  "out": ("out", None, "CSV output (stdout when omitted)"),
                  "svg": ("out", None, "SVG output")},
    "identities": {"levels": (list, [8, 16, 32], "comma-separated radial resolutions")},
}

REQUIRED = {"d2": ("mu", "nu"), "path": ("f0",),
            "second-variation": ("f", "g", "h", "k"), "stability": ("theorem", "family")}


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _bool_flag(text):
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="otlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"otlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="JSON config file")
        for key, (typ, default, hlp) in {**COMMON, **opts}.items():
            flag = "--" + key.replace("_", "-")
            if key == "family_params":
                continue
            if typ is bool and default is None:
                sp.add_argument(flag, nargs="?", const=True, type=_bool_flag, help=hlp)
                sp.add_argument("--no-" + key.replace("_", "-"), dest=key, action="store_false")
            elif typ is bool:
                sp.add_argument(flag, action="store_true", help=hlp)
            elif typ is list:
                sp.add_argument(flag, type=_floats, help=hlp)
            elif typ in ("in", "out"):
                sp.add_argument(flag, help=hlp, metavar="PATH")
            else:
                sp.add_argument(flag, type=typ, help=hlp)
    return p


# configuration --------------------------------------------------------------

def _coerce(key, typ, value):
    try:
        if typ in ("in", "out", str):
            return str(value)
        if typ is bool:
            return value if isinstance(value, bool) else _bool_flag(value)
        if typ is list:
            return _floats(value)
        if typ is dict:
            if not isinstance(value, dict):
                raise TypeError("expected an object")
            return dict(value)
        if typ is int and isinstance(value, float) and not value.is_integer():
            raise TypeError("expected an integer")
        return typ(value)
    except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(f"{key}: invalid value {value!r} ({exc})") from None


def resolve_config(command, flags):
    """Merge defaults, config file and flags; validate keys and paths."""
    table = {**COMMON, **OPTIONS[command]}
    cfg = {}
    base = os.getcwd()
    path = flags.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IoError(f"config: cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: {path} is not valid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config: {path} must hold a JSON object")
        base = os.path.dirname(os.path.abspath(path))
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in table:
                raise ConfigError(f"{k}: unknown config key for '{command}'")
            cfg[key] = _coerce(k, table[key][0], v)
            if table[key][0] in ("in", "out") and not os.path.isabs(cfg[key]):
                cfg[key] = os.path.join(base, cfg[key])
    cfg.update({k: v for k, v in flags.items() if k != "command"})
    out = {k: spec[1] for k, spec in table.items()}
    out.update(cfg)
    for key in REQUIRED.get(command, ()):
        if out.get(key) is None:
            raise ConfigError(f"{key}: required for '{command}'")
    for key, (typ, _, _) in table.items():
        if typ == "in" and out.get(key) is not None and not os.path.isfile(out[key]):
            raise ConfigError(f"{key}: file {out[key]} does not exist")
    for key in ("tol", "dt", "eps"):
        v = out.get(key)
        if isinstance(v, float) and not v > 0:
            raise ConfigError(f"{key}: must be positive, got {v}")
    return out


def _threads(cfg):
    n = cfg.get("threads")
    if n is None:
        env = os.environ.get("OTLAB_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigError(f"threads: must be at least 1, got {n}")
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass
    return n


# helpers ------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _dump(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _eps(cfg, dens):
    if cfg.get("eps") is not None:
        return cfg["eps"]
    return float(dens.mesh.h) ** 2


def potential(f, g, eps=None, tol=1e-9):
    """Brenier potential from ``f`` to ``g``: exact in 1D, entropic in 2D."""
    from .measures import PotentialField
    from .ot_discrete import brenier_from_duals, hessian_bracket, sinkhorn
    from .ot1d import potential_1d

    if f.domain.dim == 1:
        phi, T = potential_1d(f, g)
        br = hessian_bracket(f.domain, g.domain.diameter, f.inf, g.sup)
        return PotentialField.from_values(f.domain, phi, T.values[:, None], br)
    eps = float(f.mesh.h) ** 2 if eps is None else eps
    _, duals = sinkhorn(f, g, eps, tol=tol)
    return brenier_from_duals(duals, f.domain)


# subcommands ---------------------------------------------------------------------

def cmd_d2(cfg, timer):
    from .measures import read_density
    from .ot1d import d2_1d, quantile_levels
    from .ot_discrete import wasserstein2

    mu, nu = read_density(cfg["mu"]), read_density(cfg["nu"])
    if cfg["backend"] not in ("exact", "sinkhorn"):
        raise ConfigError(f"backend: expected 'exact' or 'sinkhorn', got {cfg['backend']!r}")
    with timer("solve"):
        if cfg["backend"] == "exact" and mu.domain.dim == 1 and nu.domain.dim == 1:
            d = d2_1d(mu, nu)
            res = {"d2": d, "d2_squared": d * d, "eps": None, "debiased": False,
                   "marginal_violation": 0.0, "atoms": len(quantile_levels(mu, nu))}
        else:
            eps = _eps(cfg, mu) if cfg["backend"] == "sinkhorn" else None
            res = wasserstein2(mu, nu, backend=cfg["backend"], eps=eps, debias=cfg["debias"],
                               tol=cfg["tol"])
            res = {k: res[k] for k in ("d2", "d2_squared", "eps", "debiased",
                                       "marginal_violation", "atoms")}
    return cfg["backend"], res


def cmd_path(cfg, timer):
    from .measures import read_density, read_field, write_density
    from .paths import geodesic, linear_path, multiplicative_path

    f0 = read_density(cfg["f0"])
    kind = cfg["kind"]
    with timer("path"):
        if kind == "multiplicative":
            if cfg["h"] is None:
                raise ConfigError("h: required for multiplicative paths")
            path = multiplicative_path(f0, read_field(cfg["h"]))
        else:
            if cfg["f1"] is None:
                raise ConfigError(f"f1: required for {kind} paths")
            f1 = read_density(cfg["f1"])
            if kind == "linear":
                path = linear_path(f0, f1)
            elif kind == "geodesic":
                path = geodesic(f0, f1, lambda a, b: potential(a, b, _eps(cfg, a), cfg["tol"]))
            else:
                raise ConfigError(f"kind: expected geodesic, linear or multiplicative, got {kind!r}")
        ft = path.density(cfg["t"])
    if cfg["out"] is not None:
        write_density(cfg["out"], ft)
    backend = "exact" if f0.domain.dim == 1 or kind != "geodesic" else "sinkhorn"
    return backend, {"kind": kind, "t": cfg["t"], "mass": ft.mass, "domain": ft.domain.header(),
                     "out": cfg["out"]}


def cmd_response(cfg, timer):
    from .linear_response import solve_response
    from .measures import ScalarField, read_density, write_field
    from .paths import constant_path, linear_path

    for side, (a, b) in (("path_f", ("f0", "f1")), ("path_g", ("g0", "g1"))):
        if cfg[side] is not None:
            files = [v.strip() for v in cfg[side].split(",") if v.strip()]
            if not 1 <= len(files) <= 2:
                raise ConfigError(f"{side}: expected one or two comma-separated files")
            for fpath in files:
                if not os.path.isfile(fpath):
                    raise ConfigError(f"{side}: file {fpath} does not exist")
            cfg[a], cfg[b] = files[0], (files[1] if len(files) == 2 else None)
        if cfg[a] is None:
            raise ConfigError(f"{a}: required for 'response' (or give {side})")

    def make(a, b):
        d0 = read_density(cfg[a])
        return linear_path(d0, read_density(cfg[b])) if cfg[b] else constant_path(d0)

    pf, pg = make("f0", "f1"), make("g0", "g1")
    t = cfg["t"]
    with timer("potential"):
        ft, gt = pf.density(t), pg.density(t)
        phi = potential(ft, gt, _eps(cfg, ft), cfg["tol"])
    with timer("solve"):
        xi = solve_response(pf, pg, phi, t)
    if cfg["out"] is not None:
        write_field(cfg["out"], ScalarField(xi.domain, xi.values))
    diag = xi.diagnostics()
    if cfg["diag"] is not None:
        _write_text(cfg["diag"], _dump(diag))
    backend = "exact" if ft.domain.dim == 1 else "sinkhorn"
    return backend, {"t": t, "diagnostics": diag, "out": cfg["out"]}


def cmd_second_variation(cfg, timer):
    from .measures import read_density, read_field
    from .ot_discrete import DebiasedSinkhorn
    from .paths import center, multiplicative_path
    from .second_variation import fd_second_derivative, second_variation, validate

    f, g = read_density(cfg["f"]), read_density(cfg["g"])
    h, k = read_field(cfg["h"]).values, read_field(cfg["k"]).values
    if cfg["center"]:
        h, k = center(h, f), center(k, g)
    backend = cfg["backend"]
    if backend not in ("exact", "sinkhorn"):
        raise ConfigError(f"backend: expected 'exact' or 'sinkhorn', got {backend!r}")
    if backend == "exact" and f.domain.dim != 1:
        raise ConfigError("backend: the exact backend is one-dimensional; use sinkhorn")
    eps = _eps(cfg, f) if backend == "sinkhorn" else None
    with timer("formula"):
        phi = potential(f, g, eps, cfg["tol"])
        formula = second_variation(f, g, h, k, phi)
    d2b = None if backend == "exact" else DebiasedSinkhorn(eps, tol=cfg["tol"])
    pf, pg = multiplicative_path(f, h), multiplicative_path(g, k)
    dt = cfg["dt"]
    with timer("finite_difference"):
        fd = fd_second_derivative(pf, pg, dt, d2b)
        fd_half = fd_second_derivative(pf, pg, dt / 2, d2b) if cfg["half_step"] else None
    rep = validate(formula, fd, dt, fd_half, eps=eps, clamp_rate=phi.clamp_rate)
    return backend, rep.to_dict()


def cmd_stability(cfg, timer):
    from .experiments import make_family, thm11_sweep, thm12_sweep, thm13_sweep
    from .plotdata import emit_plotdata

    sweeps = {"1.1": thm11_sweep, "1.2": thm12_sweep, "1.3": thm13_sweep}
    th = cfg["theorem"]
    if th not in sweeps:
        raise ConfigError(f"theorem: expected one of {sorted(sweeps)}, got {th!r}")
    fam = make_family(cfg["family"], seed=cfg["seed"], **(cfg["family_params"] or {}))
    kw = {"alpha": cfg["alpha"]} if th == "1.3" else {}
    with timer("sweep"):
        rep = sweeps[th](fam, backend=cfg["backend"], threads=cfg["_threads"], **kw)
    if cfg["csv"] is not None:
        emit_plotdata(rep, "csv", cfg["csv"])
    if cfg["svg"] is not None:
        emit_plotdata(rep, "svg", cfg["svg"], x="size", y="ratio", logx=True,
                      title=f"stability {th}")
    return cfg["backend"], {"report": rep.to_dict()}


def cmd_sharpness(cfg, timer):
    from .experiments import sharpness_report
    from .plotdata import csv_text, emit_plotdata

    with timer("sweep"):
        rep = sharpness_report(cfg["p"], cfg["eta"], cfg["eps"])
    rows = sorted(rep.rows, key=lambda r: r["index"])
    cols = ["eps", "a", "quantile_sup", "density_sup", "ratio", "quantile_gap_half"]
    table = {"rows": rows}
    if cfg["out"] is not None:
        emit_plotdata(table, "csv", cfg["out"], columns=cols)
    elif not cfg["json"]:
        sys.stdout.write(csv_text(table, cols)[0])
    if cfg["svg"] is not None:
        emit_plotdata(table, "svg", cfg["svg"], x="eps", y="ratio", logx=True, logy=True,
                      title="sharpness")
    return "closed-form", {"report": rep.to_dict()}


def cmd_identities(cfg, timer):
    from .experiments import identity_suite

    with timer("suite"):
        res = identity_suite(tuple(int(v) for v in cfg["levels"]))
    return "finite-difference", res


COMMANDS = {"d2": cmd_d2, "path": cmd_path, "response": cmd_response,
            "second-variation": cmd_second_variation, "stability": cmd_stability,
            "sharpness": cmd_sharpness, "identities": cmd_identities}


class _Timer:
    def __init__(self):
        self.times = {}

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[name] = time.perf_counter() - self.t0

        return _Ctx()


def run(argv=None):
    """Parse ``argv``, execute the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(args)
    command = flags.pop("command")
    try:
        cfg = resolve_config(command, flags)
        cfg["_threads"] = _threads(cfg)
        timer = _Timer()
        backend, result = COMMANDS[command](cfg, timer)
        payload = {"version": __version__, "command": command, "seed": cfg["seed"],
                   "backend": backend, "timings": timer.times if cfg["timings"] else {},
                   **result}
        text = _dump(payload)
        targets = [cfg["json_out"]]
        if command == "second-variation":
            targets.append(cfg["out"])
        targets = [p for p in dict.fromkeys(targets) if p]
        for p in targets:
            _write_text(p, text)
        # sharpness prints its CSV table unless JSON is requested
        if cfg["json"] or (not targets and command != "sharpness"):
            sys.stdout.write(text)
        return 0
    except (ValidationError, IoError) as exc:
        print(f"otlab {command}: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"otlab {command}: solver failure: {exc}", file=sys.stderr)
        return 3


def load_schema(command):
    """Published JSON schema of a subcommand's output."""
    from importlib import resources

    name = command.replace("-", "_") + ".json"
    return json.loads(resources.files("otlab").joinpath("schemas", name).read_text())


def main():
    sys.exit(run())


__all__ = ["run", "main", "build_parser", "resolve_config", "potential", "load_schema"]

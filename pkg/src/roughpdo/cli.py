"""Command-line runner.

    roughpdo <command> [options]

Commands: verify, smooth, oscint, compose, apply, parametrix, fredholm,
gallery.  Options can come from a TOML file (``--config``); flags given on
the command line win.  Reports are written as JSON to ``--out`` with CSV
companions for per-annulus and per-k series.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 hypothesis
violation (warnings become violations under ``--strict``).
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calculus, fredholm, oscint, smoothing
from .errors import HypothesisError, HypothesisWarning, ParameterError, RoughPDOError
from .gallery import _GALLERY, gallery, list_gallery, x_profile
from .grid import Grid, sobolev_norm
from .symbol_core import sampling_plan, verify_symbol_class

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

COMMANDS = ("verify", "smooth", "oscint", "compose", "apply", "parametrix", "fredholm", "gallery")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HYPOTHESIS = 0, 2, 3, 4

# option name -> (type, default)
OPTIONS = {
    "gamma": (float, 0.5),
    "eps_tilde": (float, None),
    "theta": (float, 0.1),
    "s": (float, 0.1),
    "k": (int, 1),
    "R": (float, None),
    "alpha_cap": (int, 2),
    "threshold": (float, 1e-6),
    "band": (float, 0.5),
    "chi": (str, "gaussian"),
    "resolution": (int, 256),
    "osc_box": (float, 8 * math.pi),
    "function": (str, "gaussian"),
    "psi_profile": (str, "quintic"),
    "adjoint": (bool, False),
    "save_operator": (bool, False),
}


@dataclass
class ExperimentConfig:
    command: str
    symbol: dict = field(default_factory=dict)  # {"name": ..., params}
    symbol2: dict = field(default_factory=dict)
    amplitude: dict = field(default_factory=dict)
    grid: dict = field(default_factory=lambda: {"P": 256, "dim": 1, "L": 1.0})
    levels: tuple = (256, 512, 1024)
    options: dict = field(default_factory=dict)
    out: str = "roughpdo-out"
    workers: int = 1
    seed: int = 0
    strict: bool = False
    as_json: bool = False

    def opt(self, name):
        return self.options.get(name, OPTIONS[name][1])

    def validate(self):
        """Check names and windows before any computation."""
        if self.command not in COMMANDS:
            raise ParameterError(f"unknown command {self.command!r}")
        g = self.grid
        if int(g.get("dim", 1)) not in (1, 2):
            raise ParameterError("--dim must be 1 or 2")
        Grid(int(g.get("dim", 1)), float(g.get("L", 1.0)), int(g.get("P", 256)))
        needs = {"verify": ["symbol"], "smooth": ["symbol"], "compose": ["symbol", "symbol2"], "apply": ["symbol"],
                 "parametrix": ["symbol"], "fredholm": ["symbol"], "oscint": ["amplitude"]}
        for slot in needs.get(self.command, []):
            spec = getattr(self, slot)
            if not spec.get("name"):
                raise ParameterError(f"{self.command} needs --{slot.replace('symbol2', 'symbol2')}")
            if slot != "amplitude" and spec["name"] not in _GALLERY:
                raise LookupError(f"unknown gallery symbol {spec['name']!r}")
        if self.command == "smooth" and not 0 < self.opt("gamma") < 1:
            raise ParameterError("gamma must lie in (0, 1)")
        if self.command == "compose" and self.opt("k") < 1:
            raise ParameterError("k must be at least 1")
        if self.command == "fredholm":
            self.fredholm_config()
        if self.workers < 1:
            raise ParameterError("--workers must be positive")

    def grid_obj(self) -> Grid:
        g = self.grid
        return Grid(int(g.get("dim", 1)), float(g.get("L", 1.0)), int(g.get("P", 256)))

    def fredholm_config(self) -> fredholm.FredholmExperimentConfig:
        return fredholm.FredholmExperimentConfig(
            s=self.opt("s"), theta=self.opt("theta"), eps_tilde=self.opt("eps_tilde") or 0.05, levels=tuple(self.levels),
            svd_threshold=self.opt("threshold"), L=float(self.grid.get("L", 1.0)), R=self.opt("R"),
            psi_profile=self.opt("psi_profile"), band=self.opt("band"), workers=self.workers,
        )


def build_symbol(spec: dict, dim: int = 1):
    params = {k: v for k, v in spec.items() if k != "name"}
    factory = _GALLERY[spec["name"]][0]
    if "dim" in inspect.signature(factory).parameters:
        params.setdefault("dim", dim)
    elif dim != 1:
        raise ParameterError(f"gallery symbol {spec['name']!r} is one-dimensional")
    try:
        return gallery(spec["name"], **params)
    except TypeError as e:
        raise ParameterError(f"bad parameters for {spec['name']!r}: {e}") from None


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (complex, np.complexfloating)):
        return [_jsonable(float(np.real(o))), _jsonable(float(np.imag(o)))]
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else ("-inf" if f < 0 else "nan"))
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


class Output:
    def __init__(self, cfg: ExperimentConfig):
        self.dir = Path(cfg.out)
        self.cmd = cfg.command
        self.files = []

    def json(self, payload: dict, meta: dict | None = None) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / f"{self.cmd}.json"
        body = {"command": self.cmd, "report": _jsonable(payload)}
        if meta:
            body["meta"] = _jsonable(meta)
        p.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        self.files.append(p)
        return p

    def csv(self, suffix: str, header, rows) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / f"{self.cmd}_{suffix}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        self.files.append(p)
        return p


def _annulus_rows(report_dict):
    for key, rows in sorted(report_dict.get("annulus_sups", {}).items()):
        for j, br, v in rows:
            yield key, j, br, v


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: ExperimentConfig, out: Output) -> dict:
    g = cfg.grid_obj()
    a = build_symbol(cfg.symbol, g.dim)
    rep = verify_symbol_class(a, sampling_plan(g), alpha_cap=cfg.opt("alpha_cap"))
    d = rep.to_dict()
    out.json({"symbol": cfg.symbol, "grid": cfg.grid, **d})
    out.csv("annuli", ["cell", "annulus", "bracket", "sup"], _annulus_rows(d))
    return {"passed": d["passed"]}


def cmd_smooth(cfg: ExperimentConfig, out: Output) -> dict:
    g = cfg.grid_obj()
    a = build_symbol(cfg.symbol, g.dim)
    sc = smoothing.SmoothingConfig.build(g, cfg.opt("gamma"), eps_tilde=cfg.opt("eps_tilde"))
    sp = smoothing.split(a, sc)
    sharp = smoothing.verify_sharp(sp).to_dict()
    flat = smoothing.verify_flat(sp).to_dict()
    order, res = smoothing.flat_order(sp)
    payload = {
        "symbol": cfg.symbol, "grid": cfg.grid, "gamma": sc.gamma, "J_max": sc.J_max,
        "eps_tilde": sc.eps_tilde_for(a.spec), "flat_order": order, "flat_order_residual": res,
        "decomposition_residual": smoothing.decomposition_residual(sp), "sharp": sharp, "flat": flat,
    }
    out.json(payload)
    out.csv("annuli", ["part", "cell", "annulus", "bracket", "sup"],
            [(part, *row) for part, d in (("sharp", sharp), ("flat", flat)) for row in _annulus_rows(d)])
    return {"flat_order": order, "passed": sharp["passed"] and flat["passed"]}


def cmd_oscint(cfg: ExperimentConfig, out: Output) -> dict:
    spec = dict(cfg.amplitude)
    amp = oscint.amplitude_gallery(spec.pop("name"), **spec)
    oc = oscint.OscIntConfig(chi=cfg.opt("chi"), box=cfg.opt("osc_box"), resolution=cfg.opt("resolution"))
    value, diag = oscint.osc_integral(amp, oc)
    d = diag.to_dict()
    out.json({"amplitude": cfg.amplitude, "value": value, "diagnostics": d})
    out.csv("sequence", ["eps", "re", "im"], [(e, float(np.real(v)), float(np.imag(v))) for e, v in zip(diag.eps, diag.sequence)])
    return {"value": value, "divergent": diag.divergent}


def cmd_compose(cfg: ExperimentConfig, out: Output) -> dict:
    a1 = build_symbol(cfg.symbol)
    a2 = build_symbol(cfg.symbol2)
    plan = calculus.CompositionPlan.default(L=float(cfg.grid.get("L", 1.0)))
    res = calculus.sharp_expansion(a1, a2, cfg.opt("k"), plan)
    d = res.to_dict()
    out.json({"symbol": cfg.symbol, "symbol2": cfg.symbol2, **d})
    out.csv("remainder", ["xi", "remainder_sup"], zip(d["xi"], d["remainder_sup"]))
    return {"fitted_remainder_order": res.fitted_remainder_order, "claimed_order": res.claimed_order}


def cmd_apply(cfg: ExperimentConfig, out: Output) -> dict:
    g = cfg.grid_obj()
    a = build_symbol(cfg.symbol, g.dim)
    op = calculus.quantize(a, g)
    prof = x_profile(cfg.opt("function"))
    scalar = np.prod([prof(g.x[..., i]) for i in range(g.dim)], axis=0)
    u = g.function(lambda x: np.repeat(scalar[..., None], a.N, -1), N=a.N)
    v = op.apply(u)
    s = cfg.opt("s")
    norm = calculus.operator_norm(op.conjugated(s), seed=cfg.seed)
    payload = {
        "symbol": cfg.symbol, "grid": cfg.grid, "function": cfg.opt("function"), "s": s,
        "input_sobolev_norm": sobolev_norm(u, s + a.spec.m), "output_sobolev_norm": sobolev_norm(v, s),
        "conjugated_operator_norm": norm,
    }
    if cfg.opt("save_operator"):
        out.dir.mkdir(parents=True, exist_ok=True)
        out.files.extend(op.save(out.dir / "operator"))
    out.json(payload)
    vals = v.values.reshape(g.size, a.N)
    xs = g.x.reshape(-1, g.dim)
    out.csv("result", [f"x{i + 1}" for i in range(g.dim)] + ["component", "re", "im"],
            [(*xs[i], c, float(vals[i, c].real), float(vals[i, c].imag)) for i in range(g.size) for c in range(a.N)])
    return {"conjugated_operator_norm": norm}


def cmd_parametrix(cfg: ExperimentConfig, out: Output) -> dict:
    a = build_symbol(cfg.symbol, int(cfg.grid.get("dim", 1)))
    ell = fredholm.ellipticity_check(a)
    if not ell.elliptic:
        raise HypothesisError("ellipticity", f"{a.name} is not elliptic on the lattice")
    R = cfg.opt("R") or max(ell.R, 1.0)
    pc = fredholm.ParametrixConfig(R, cfg.opt("psi_profile"))
    b = fredholm.build_parametrix(a, pc)
    v = np.linspace(-4 * R, 4 * R, 81)
    X, Q = np.meshgrid(v, v, indexing="ij")
    X = np.stack([X] * a.dim, -1)
    Q = np.stack([Q] * a.dim, -1)
    far = np.sum(X**2, -1) + np.sum(Q**2, -1) >= 4 * R**2
    err = np.abs(a(X, Q) @ b(X, Q) - np.eye(a.N))[far].max()
    payload = {"symbol": cfg.symbol, "R": R, "psi_profile": pc.psi_profile, "ellipticity": ell.to_dict(),
               "parametrix_order": b.spec.m, "exactness_off_ball": float(err)}
    if a.dim == 1:
        g = cfg.grid_obj()
        rep = verify_symbol_class(b, sampling_plan(g, per_annulus=8, x_stride=max(1, g.points // 128)), alpha_cap=cfg.opt("alpha_cap"))
        payload["class_report"] = rep.to_dict()
    out.json(payload)
    out.csv("det_profile", ["radius", "min_det"], ell.det_min_profile)
    return {"C0": ell.C0, "R": R, "exactness_off_ball": float(err)}


def cmd_fredholm(cfg: ExperimentConfig, out: Output) -> dict:
    a = build_symbol(cfg.symbol, int(cfg.grid.get("dim", 1)))
    rep = fredholm.fredholm_experiment(a, cfg.fredholm_config(), adjoint=cfg.opt("adjoint"), strict=cfg.strict)
    d = rep.to_dict()
    meta = {"timings": d.pop("timings")}
    out.json({"symbol": cfg.symbol, **d}, meta)
    out.csv("singular_values", ["residual", "level", "k", "sigma"], rep.csv_rows())
    return {"index": rep.index, "index_method": rep.index_method, "kernel_dim": rep.kernel_dim,
            "compact_residuals": rep.compact_residuals}


def cmd_gallery(cfg: ExperimentConfig, out: Output) -> dict:
    items = list_gallery()
    if cfg.as_json:
        print(json.dumps(items))
    else:
        width = max(len(i["name"]) for i in items)
        for i in items:
            print(f"{i['name']:<{width}}  {i['description']}")
    return {}


HANDLERS = {
    "verify": cmd_verify, "smooth": cmd_smooth, "oscint": cmd_oscint, "compose": cmd_compose, "apply": cmd_apply,
    "parametrix": cmd_parametrix, "fredholm": cmd_fredholm, "gallery": cmd_gallery,
}


def run(cfg: ExperimentConfig) -> int:
    """Validate, dispatch, write reports; returns the exit status."""
    try:
        with warnings.catch_warnings():
            if cfg.strict:
                warnings.simplefilter("error", HypothesisWarning)
            cfg.validate()
            out = Output(cfg)
            summary = HANDLERS[cfg.command](cfg, out)
    except HypothesisWarning as w:
        print(f"hypothesis violation: {w}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except RoughPDOError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (LookupError, OSError, tomllib.TOMLDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.command != "gallery":
        print(json.dumps({"command": cfg.command, **_jsonable(summary), "files": [str(p) for p in out.files]}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return {"true": True, "false": False}.get(text.lower(), text)


def _levels(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; flags override its values")
    common.add_argument("--grid", type=int, dest="P", help="lattice points per axis")
    common.add_argument("--dim", type=int, choices=(1, 2))
    common.add_argument("--box", type=float, dest="L", help="half-period parameter L (box [-pi L, pi L))")
    common.add_argument("--levels", type=_levels, help="refinement levels, e.g. 256,512,1024")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--strict", action="store_true", default=None, help="hypothesis warnings become exit 4")

    sym = argparse.ArgumentParser(add_help=False)
    sym.add_argument("--symbol", help="gallery symbol name")
    sym.add_argument("--m", type=float, help="symbol order parameter")
    sym.add_argument("--tau", type=float, help="Hölder exponent parameter")
    sym.add_argument("--c", type=float, help="amplitude parameter c")
    sym.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="extra symbol parameter")

    p = argparse.ArgumentParser(prog="roughpdo", description="Numerical calculus for Hölder-regular pseudodifferential operators.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common, sym], help="verify the claimed symbol class")
    v.add_argument("--alpha-cap", type=int, dest="alpha_cap")
    s = sub.add_parser("smooth", parents=[common, sym], help="symbol smoothing a = a_sharp + a_flat")
    s.add_argument("--gamma", type=float)
    s.add_argument("--eps-tilde", type=float, dest="eps_tilde")
    o = sub.add_parser("oscint", parents=[common], help="regularized oscillatory integral")
    o.add_argument("--amplitude", help="amplitude gallery name")
    o.add_argument("--amp-param", action="append", default=[], metavar="KEY=VALUE", dest="amp_param")
    o.add_argument("--chi", choices=("gaussian", "bump"))
    o.add_argument("--resolution", type=int)
    o.add_argument("--osc-box", type=float, dest="osc_box")
    c = sub.add_parser("compose", parents=[common, sym], help="composition expansion and remainder order")
    c.add_argument("--symbol2", help="right factor")
    c.add_argument("--param2", action="append", default=[], metavar="KEY=VALUE")
    c.add_argument("--k", type=int)
    a = sub.add_parser("apply", parents=[common, sym], help="apply op(a) to a sampled function")
    a.add_argument("--function")
    a.add_argument("--s", type=float)
    a.add_argument("--save-operator", action="store_true", default=None, dest="save_operator")
    pm = sub.add_parser("parametrix", parents=[common, sym], help="ellipticity check and parametrix")
    pm.add_argument("--R", type=float)
    pm.add_argument("--psi-profile", choices=fredholm.PSI_PROFILES, dest="psi_profile")
    pm.add_argument("--alpha-cap", type=int, dest="alpha_cap")
    f = sub.add_parser("fredholm", parents=[common, sym], help="Fredholm experiment")
    for name, typ in (("s", float), ("theta", float), ("eps-tilde", float), ("threshold", float), ("R", float), ("band", float)):
        f.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))
    f.add_argument("--psi-profile", choices=fredholm.PSI_PROFILES, dest="psi_profile")
    f.add_argument("--adjoint", action="store_true", default=None)
    g = sub.add_parser("gallery", parents=[common], help="list gallery symbols")
    g.add_argument("--json", action="store_true", dest="as_json")
    return p


def _kv(items):
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ParameterError(f"expected KEY=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = _value(v.strip())
    return out


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    """Merge a TOML file (if any) with flags; flags win."""
    base = {}
    if getattr(ns, "config", None):
        with open(ns.config, "rb") as fh:
            base = tomllib.load(fh)
    cfg = ExperimentConfig(command=ns.command)
    grid = dict(cfg.grid)
    grid.update(base.get("grid", {}))
    cfg.symbol = dict(base.get("symbol", {}))
    cfg.symbol2 = dict(base.get("symbol2", {}))
    cfg.amplitude = dict(base.get("amplitude", {}))
    cfg.options = dict(base.get("options", {}))
    for key in ("out", "workers", "seed", "strict"):
        if key in base:
            setattr(cfg, key, base[key])
    if "levels" in base:
        cfg.levels = _levels(base["levels"]) if isinstance(base["levels"], str) else tuple(base["levels"])

    d = vars(ns)
    for key, gk in (("P", "P"), ("dim", "dim"), ("L", "L")):
        if d.get(key) is not None:
            grid[gk] = d[key]
    cfg.grid = grid
    for key in ("out", "workers", "seed", "strict", "as_json"):
        if d.get(key) is not None:
            setattr(cfg, key, d[key])
    if d.get("levels") is not None:
        cfg.levels = d["levels"]
    if d.get("symbol"):
        if d["symbol"] != cfg.symbol.get("name"):
            cfg.symbol = {}
        cfg.symbol["name"] = d["symbol"]
    for key in ("m", "tau", "c"):
        if d.get(key) is not None:
            cfg.symbol[key] = d[key]
    cfg.symbol.update(_kv(d.get("param")))
    if d.get("symbol2"):
        cfg.symbol2 = {"name": d["symbol2"], **({} if d["symbol2"] != cfg.symbol2.get("name") else cfg.symbol2)}
    cfg.symbol2.update(_kv(d.get("param2")))
    if d.get("amplitude"):
        cfg.amplitude = {"name": d["amplitude"], **({} if d["amplitude"] != cfg.amplitude.get("name") else cfg.amplitude)}
    cfg.amplitude.update(_kv(d.get("amp_param")))
    for name, (typ, _) in OPTIONS.items():
        if d.get(name) is not None:
            cfg.options[name] = d[name]
    for name, val in list(cfg.options.items()):
        if name not in OPTIONS:
            raise ParameterError(f"unknown option {name!r}")
        typ = OPTIONS[name][0]
        if val is not None and not isinstance(val, typ):
            try:
                cfg.options[name] = typ(val)
            except (TypeError, ValueError):
                raise ParameterError(f"option {name} expects {typ.__name__}") from None
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (RoughPDOError, OSError, tomllib.TOMLDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Configuration ingestion and the command-line front end.

One declarative JSON config document describes a run (surface, shift,
decay law, dimension function, window, ranges, tolerances); a small flag
set provides per-run overrides.  Reports are written as JSON / JSON-lines
/ CSV with deterministic byte content: identical config + seed produce
identical files at any parallelism degree.

Commands: series, cover, certificate, dim-estimate, hessian, fiber.
Exit codes: 0 success, 2 validation error (one-line diagnostic naming the
offending key), 3 budget exhaustion (partial outputs written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import (ArgumentError, BudgetError, ConfigError,
                     ConstructionError, SlabcoverError)
from .hessian import condition_II_check, make_builtin, singular_fraction, trace_fiber
from .measure import box_dimension, cantelli_certificate, membership_hits
from .model import (ApproxFunction, Box, CompactWindow, DimensionFunction,
                    Hypersurface, Polynomial, Shift)
from .resonant import build_h, classify_regime, cover_slab
from .series import dim_bound, series_scan

__all__ = ["RunConfig", "validate_config", "run", "main"]

OUTPUT_ENV = "SLABCOVER_OUT"

_TOP_KEYS = {
    "n", "surface", "shift", "psi", "f", "window", "q_range", "series",
    "grids", "tolerances", "cover", "certificate", "dim_estimate",
    "budget", "output_dir", "parallelism", "seed",
}


@dataclass
class RunConfig:
    doc: dict
    n: int
    surface: Hypersurface
    shift: Shift
    psi: ApproxFunction | None
    f: DimensionFunction | None
    window: CompactWindow
    Q_min: int
    Q_max: int
    series_mode: str = "surface"
    series_margin: float = 0.05
    probe_res: int = 64
    regime_res: int = 32
    refinements: list = field(default_factory=lambda: [16, 32, 64, 128])
    eps_grad: float = 1e-3
    tol_rel: float = 1e-9
    cover_C: float | None = None
    cover_epsilon: float | None = None
    cover_mode: str = "balls"
    cert_samples: int = 6
    cert_p_per_q: int = 2
    cert_ratio_window: tuple = (1e-3, 1e3)
    cert_stability: float = 10.0
    dim_scales: list = field(default_factory=lambda: [2 ** -k for k in range(3, 8)])
    dim_Q_min: int = 2
    dim_Q_max: int = 64
    term_budget: int = 50_000_000
    ball_budget: int = 20_000_000
    output_dir: str | None = None
    parallelism: int = 1
    seed: int = 0


class _Validator:
    def __init__(self, doc):
        self.doc = doc
        self.errors: list[tuple[str, str]] = []

    def fail(self, path, msg):
        self.errors.append((path, msg))

    def check_keys(self, obj, allowed, path):
        if not isinstance(obj, dict):
            self.fail(path, "expected an object")
            return False
        for k in obj:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else k, "unknown key")
        return True

    def get(self, obj, key, kind, path, default=None, required=False):
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}" if path else key, "missing required key")
            return default
        v = obj[key]
        if kind is float and isinstance(v, int):
            v = float(v)
        if kind is not None and not isinstance(v, kind):
            self.fail(f"{path}.{key}" if path else key,
                      f"expected {getattr(kind, '__name__', kind)}")
            return default
        return v


def _parse_poly(spec, nvars, val: _Validator, path: str):
    """Polynomial spec: list of [exponents..., coefficient] rows."""
    if not isinstance(spec, list):
        val.fail(path, "expected a list of [e_1, ..., e_d, coeff] rows")
        return Polynomial.zero(nvars)
    coeffs = {}
    for i, row in enumerate(spec):
        if not isinstance(row, list) or len(row) != nvars + 1:
            val.fail(f"{path}[{i}]", f"expected {nvars} exponents plus a coefficient")
            continue
        try:
            exps = tuple(int(e) for e in row[:-1])
            coeffs[exps] = coeffs.get(exps, 0.0) + float(row[-1])
        except (TypeError, ValueError):
            val.fail(f"{path}[{i}]", "non-numeric entry")
    try:
        return Polynomial(coeffs, nvars)
    except ConstructionError as exc:
        val.fail(path, str(exc))
        return Polynomial.zero(nvars)


def validate_config(doc: dict) -> RunConfig:
    """Full structural and invariant validation; strict mode (unknown keys
    rejected).  Raises ConfigError carrying (key path, message) pairs."""
    val = _Validator(doc)
    val.check_keys(doc, _TOP_KEYS, "")

    n = val.get(doc, "n", int, "", required=True)
    if n is not None and n < 2:
        val.fail("n", "ambient dimension must be >= 2")
    if n is None:
        raise ConfigError(val.errors)

    surface = None
    s_doc = val.get(doc, "surface", dict, "", required=True)
    if s_doc is not None:
        val.check_keys(s_doc, {"builtin", "params", "polynomial", "domain"}, "surface")
        if "builtin" in s_doc:
            try:
                surface = make_builtin(s_doc["builtin"], s_doc.get("params"))
                if surface.n != n:
                    val.fail("surface.builtin",
                             f"builtin has n = {surface.n}, config says {n}")
            except ConstructionError as exc:
                val.fail("surface.builtin", str(exc))
        elif "polynomial" in s_doc:
            dom_doc = val.get(s_doc, "domain", dict, "surface", required=True)
            body = _parse_poly(s_doc["polynomial"], n - 1, val, "surface.polynomial")
            if dom_doc is not None:
                val.check_keys(dom_doc, {"lower", "upper"}, "surface.domain")
                try:
                    dom = Box(tuple(dom_doc.get("lower", ())),
                              tuple(dom_doc.get("upper", ())))
                    surface = Hypersurface(n, dom, body)
                except ConstructionError as exc:
                    val.fail("surface.domain", str(exc))
        else:
            val.fail("surface", "need either 'builtin' or 'polynomial'")

    shift = Shift.zero(n - 1)
    if "shift" in doc:
        sh_doc = val.get(doc, "shift", dict, "")
        if sh_doc is not None:
            val.check_keys(sh_doc, {"polynomial"}, "shift")
            body = _parse_poly(sh_doc.get("polynomial", []), n - 1, val,
                               "shift.polynomial")
            shift = Shift(body)

    psi = None
    if "psi" in doc:
        p_doc = val.get(doc, "psi", dict, "")
        if p_doc is not None:
            val.check_keys(p_doc, {"variant", "tau", "weights", "exponent"}, "psi")
            variant = val.get(p_doc, "variant", str, "psi", default="power")
            tau = val.get(p_doc, "tau", float, "psi", required=True)
            try:
                if variant == "power":
                    psi = ApproxFunction.power(tau)
                elif variant == "quasi-norm-power":
                    w = p_doc.get("weights")
                    if not isinstance(w, list) or len(w) != n:
                        val.fail("psi.weights", f"expected {n} positive weights")
                    else:
                        psi = ApproxFunction.quasi_norm_power(tau, w)
                elif variant == "log-corrected":
                    psi = ApproxFunction.log_corrected(
                        tau, val.get(p_doc, "exponent", float, "psi", default=1.0))
                else:
                    val.fail("psi.variant", f"unknown variant {variant!r}")
            except ConstructionError as exc:
                val.fail("psi.weights" if "weight" in str(exc) else "psi", str(exc))

    fdim = None
    if "f" in doc:
        f_doc = val.get(doc, "f", dict, "")
        if f_doc is not None:
            val.check_keys(f_doc, {"variant", "s", "exponent"}, "f")
            variant = val.get(f_doc, "variant", str, "f", default="power")
            s = val.get(f_doc, "s", float, "f", required=True)
            try:
                if variant == "power":
                    fdim = DimensionFunction.power(s)
                elif variant == "power-log":
                    fdim = DimensionFunction.power_log(
                        s, val.get(f_doc, "exponent", float, "f", default=1.0))
                else:
                    val.fail("f.variant", f"unknown variant {variant!r}")
            except ConstructionError as exc:
                val.fail("f.s", str(exc))
            # growth-exponent gate for the approximation pipeline
            if fdim is not None and n >= 3 and not (s < 2 * (n - 2)):
                val.fail("f.s", f"growth exponent gate: need s < 2(n-2) = "
                                f"{2 * (n - 2)}, got {s}")

    window = None
    if surface is not None:
        w_doc = doc.get("window")
        try:
            if w_doc is None:
                margin = min(surface.domain.widths) / 4.0
                window = CompactWindow.inside(surface.domain, margin)
            else:
                val.check_keys(w_doc, {"margin", "lower", "upper"}, "window")
                if "margin" in w_doc:
                    window = CompactWindow.inside(surface.domain,
                                                  float(w_doc["margin"]))
                else:
                    box = Box(tuple(w_doc.get("lower", ())),
                              tuple(w_doc.get("upper", ())))
                    window = CompactWindow.from_box(box, surface.domain)
        except (ConstructionError, TypeError, ValueError) as exc:
            val.fail("window", str(exc))

    Q_min, Q_max = 2, 64
    if "q_range" in doc:
        q_doc = val.get(doc, "q_range", dict, "")
        if q_doc is not None:
            val.check_keys(q_doc, {"min", "max"}, "q_range")
            Q_min = val.get(q_doc, "min", int, "q_range", default=2)
            Q_max = val.get(q_doc, "max", int, "q_range", default=64)
            if Q_min > Q_max:
                val.fail("q_range", f"min {Q_min} exceeds max {Q_max}")
            if Q_min < 1:
                val.fail("q_range.min", "must be >= 1")

    cfg = RunConfig(doc=doc, n=n, surface=surface, shift=shift, psi=psi,
                    f=fdim, window=window, Q_min=Q_min, Q_max=Q_max)

    if "series" in doc:
        se = val.get(doc, "series", dict, "")
        if se is not None:
            val.check_keys(se, {"mode", "margin"}, "series")
            cfg.series_mode = val.get(se, "mode", str, "series", default="surface")
            if cfg.series_mode not in ("surface", "ambient"):
                val.fail("series.mode", "must be 'surface' or 'ambient'")
            cfg.series_margin = val.get(se, "margin", float, "series", default=0.05)
    if "grids" in doc:
        gr = val.get(doc, "grids", dict, "")
        if gr is not None:
            val.check_keys(gr, {"probe_res", "regime_res", "refinements"}, "grids")
            cfg.probe_res = val.get(gr, "probe_res", int, "grids", default=64)
            cfg.regime_res = val.get(gr, "regime_res", int, "grids", default=32)
            refs = val.get(gr, "refinements", list, "grids")
            if refs is not None:
                cfg.refinements = [int(r) for r in refs]
    if "tolerances" in doc:
        to = val.get(doc, "tolerances", dict, "")
        if to is not None:
            val.check_keys(to, {"eps_grad", "tol_rel"}, "tolerances")
            cfg.eps_grad = val.get(to, "eps_grad", float, "tolerances", default=1e-3)
            cfg.tol_rel = val.get(to, "tol_rel", float, "tolerances", default=1e-9)
    if "cover" in doc:
        co = val.get(doc, "cover", dict, "")
        if co is not None:
            val.check_keys(co, {"C", "epsilon", "mode"}, "cover")
            if co.get("C") is not None:
                cfg.cover_C = float(co["C"])
            if co.get("epsilon") is not None:
                cfg.cover_epsilon = float(co["epsilon"])
            cfg.cover_mode = val.get(co, "mode", str, "cover", default="balls")
            if cfg.cover_mode not in ("balls", "cost", "quadrature"):
                val.fail("cover.mode", "must be balls | cost | quadrature")
    if "certificate" in doc:
        ce = val.get(doc, "certificate", dict, "")
        if ce is not None:
            val.check_keys(ce, {"samples_per_range", "p_per_q", "ratio_window",
                                "stability"}, "certificate")
            cfg.cert_samples = val.get(ce, "samples_per_range", int,
                                       "certificate", default=6)
            cfg.cert_p_per_q = val.get(ce, "p_per_q", int, "certificate", default=2)
            rw = ce.get("ratio_window")
            if rw is not None:
                if not (isinstance(rw, list) and len(rw) == 2):
                    val.fail("certificate.ratio_window", "expected [lo, hi]")
                else:
                    cfg.cert_ratio_window = (float(rw[0]), float(rw[1]))
            cfg.cert_stability = val.get(ce, "stability", float, "certificate",
                                         default=10.0)
    if "dim_estimate" in doc:
        de = val.get(doc, "dim_estimate", dict, "")
        if de is not None:
            val.check_keys(de, {"scales", "Q_min", "Q_max"}, "dim_estimate")
            sc = de.get("scales")
            if sc is not None:
                cfg.dim_scales = [float(s) for s in sc]
            cfg.dim_Q_min = val.get(de, "Q_min", int, "dim_estimate", default=2)
            cfg.dim_Q_max = val.get(de, "Q_max", int, "dim_estimate", default=64)
    if "budget" in doc:
        bu = val.get(doc, "budget", dict, "")
        if bu is not None:
            val.check_keys(bu, {"terms", "balls"}, "budget")
            cfg.term_budget = int(val.get(bu, "terms", (int, float), "budget",
                                          default=cfg.term_budget))
            cfg.ball_budget = int(val.get(bu, "balls", (int, float), "budget",
                                          default=cfg.ball_budget))
    cfg.output_dir = val.get(doc, "output_dir", str, "", default=None)
    cfg.parallelism = val.get(doc, "parallelism", int, "", default=1)
    if cfg.parallelism < 1:
        val.fail("parallelism", "must be >= 1")
    cfg.seed = val.get(doc, "seed", int, "", default=0)

    if val.errors:
        raise ConfigError(val.errors)
    return cfg


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_lines(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(row)
            fh.write("\n")


def _out_dir(cfg: RunConfig, override: str | None) -> str:
    out = override or cfg.output_dir or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _require(cfg: RunConfig, command: str, *fields):
    missing = [name for name in fields if getattr(cfg, name) is None]
    if missing:
        raise ConfigError([(name if name != "psi" else "psi",
                            f"required by command {command!r}") for name in missing])
    if command in ("series", "cover", "certificate", "dim-estimate") and cfg.n < 3:
        raise ConfigError([("n", f"command {command!r} needs n >= 3")])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_series(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "series", "psi", "f")
    report = series_scan(cfg.psi, cfg.f, cfg.n, cfg.Q_max,
                         mode=cfg.series_mode, margin=cfg.series_margin,
                         term_budget=cfg.term_budget,
                         parallelism=cfg.parallelism)
    _write_lines(os.path.join(out, "series.csv"), report.csv_rows())
    _write_json(os.path.join(out, "series.json"), report.verdict_record())
    return 0


def _cmd_cover(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "cover", "psi", "f", "surface", "window")
    if args.q is None or args.p is None:
        raise ConfigError([("q" if args.q is None else "p",
                            "cover needs --p and --q flags")])
    q = np.array([int(t) for t in args.q.split(",")])
    h = build_h(int(args.p), q, cfg.surface, cfg.shift, cfg.psi)
    regime = classify_regime(h, cfg.window, eps_grad=cfg.eps_grad,
                             probe_res=cfg.regime_res)
    record = {"p": int(args.p), "q": [int(t) for t in q],
              "regime": regime.tag, "c_lo": regime.c_lo, "c_hi": regime.c_hi}
    if regime.v is not None:
        record["v"] = list(regime.v)
    if not regime.is_exceptional:
        rep = cover_slab(h, regime, cfg.window, cfg.f, C=cfg.cover_C,
                         epsilon=cfg.cover_epsilon, mode=cfg.cover_mode,
                         max_balls=cfg.ball_budget)
        record.update(rep.record())
    _write_lines(os.path.join(out, "cover.jsonl"),
                 [json.dumps(record, sort_keys=True)])
    return 0


def _cmd_certificate(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "certificate", "psi", "f", "surface", "window")
    cert = cantelli_certificate(
        cfg.surface, cfg.shift, cfg.psi, cfg.f, cfg.window,
        cfg.Q_min, cfg.Q_max,
        samples_per_range=cfg.cert_samples, p_per_q=cfg.cert_p_per_q,
        ratio_window=cfg.cert_ratio_window, stability=cfg.cert_stability,
        seed=cfg.seed, eps_grad=cfg.eps_grad, parallelism=cfg.parallelism)
    _write_json(os.path.join(out, "certificate.json"), cert.record())
    return 0


def _cmd_dim_estimate(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "dim-estimate", "psi", "surface", "window")

    def membership(points):
        return membership_hits(points, cfg.dim_Q_min, cfg.dim_Q_max,
                               cfg.surface, cfg.shift, cfg.psi)

    report = box_dimension(membership, cfg.window.box, cfg.dim_scales)
    _write_lines(os.path.join(out, "boxcount.csv"), report.csv_rows())
    rec = report.record()
    rec["Q_range"] = [cfg.dim_Q_min, cfg.dim_Q_max]
    if cfg.psi.variant == "power":
        rec["dim_bound"] = dim_bound(cfg.n, cfg.psi.tau)
    _write_json(os.path.join(out, "dim.json"), rec)
    return 0


def _cmd_hessian(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "hessian", "surface")
    report = singular_fraction(cfg.surface, grid_res=cfg.probe_res,
                               tol_rel=cfg.tol_rel)
    if cfg.f is not None:
        cond = condition_II_check(cfg.surface, cfg.f, cfg.refinements,
                                  tol_rel=cfg.tol_rel)
        report.verdicts = cond.record()
    _write_json(os.path.join(out, "hessian.json"), report.record())
    return 0


def _cmd_fiber(cfg: RunConfig, out: str, args) -> int:
    _require(cfg, "fiber", "surface")
    if args.x0 is None:
        raise ConfigError([("x0", "fiber needs the --x0 flag")])
    x0 = np.array([float(t) for t in args.x0.split(",")])
    fiber = trace_fiber(cfg.surface, x0, step=args.step, max_len=args.max_len)
    _write_json(os.path.join(out, "fiber.json"), fiber.record())
    return 0


_COMMANDS = {
    "series": _cmd_series,
    "cover": _cmd_cover,
    "certificate": _cmd_certificate,
    "dim-estimate": _cmd_dim_estimate,
    "hessian": _cmd_hessian,
    "fiber": _cmd_fiber,
}


def run(command: str, cfg: RunConfig, out_dir: str | None = None,
        args=None) -> int:
    """Execute one command against a validated config; returns the exit code
    and writes report files into the output directory."""
    if command not in _COMMANDS:
        raise ConfigError([("command", f"unknown command {command!r}")])
    out = _out_dir(cfg, out_dir)
    if args is None:
        args = argparse.Namespace(p=None, q=None, x0=None, step=0.01, max_len=2.0)
    return _COMMANDS[command](cfg, out, args)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slabcover",
        description="Resonant-slab covers, series classification and "
                    "singular-Hessian analysis on hypersurfaces.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config document")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--qmax", type=int, default=None, help="override q_range.max")
    parser.add_argument("--parallelism", type=int, default=None)
    parser.add_argument("--p", default=None, help="slab index p (cover)")
    parser.add_argument("--q", default=None, help="slab vector q, comma separated")
    parser.add_argument("--x0", default=None, help="fiber seed point, comma separated")
    parser.add_argument("--step", type=float, default=0.01, help="fiber step size")
    parser.add_argument("--max-len", dest="max_len", type=float, default=2.0)
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = validate_config(doc)
        if args.qmax is not None:
            if args.qmax < cfg.Q_min:
                raise ConfigError([("q_range", "--qmax below q_range.min")])
            cfg.Q_max = args.qmax
        if args.parallelism is not None:
            cfg.parallelism = max(1, args.parallelism)
        return run(args.command, cfg, args.out, args)
    except ConfigError as exc:
        path, msg = exc.diagnostics[0]
        print(f"{path}: {msg}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return 3
    except (ArgumentError, ConstructionError, SlabcoverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

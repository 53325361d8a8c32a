"""Command-line front end.

Subcommands evaluate large-time smiles, run finite-maturity convergence
studies, print moment expansions, calibrate chains, and emit the
arbitrage diagnostics -- all as plain CSV/JSON data files (no plotting).

Numeric CSV output uses 17 significant digits so files round-trip to the
exact binary doubles.  Exit codes: 0 success, 1 usage/input errors,
2 numeric/domain failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import calib, moments, pricer, smile
from .charfn import (
    BGParams,
    BSParams,
    CGMYParams,
    HestonParams,
    MertonParams,
    ModelSpec,
    VGParams,
)
from .errors import SmileError

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo_s, hi_s, n_s = spec.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
    except ValueError as exc:
        raise UsageError(f"grid must be 'min:max:n', got {spec!r}") from exc
    if n < 2:
        raise UsageError(f"grid needs n >= 2, got {n}")
    return np.linspace(lo, hi, n)


def _parse_list(spec: str) -> list[float]:
    try:
        return [float(t) for t in spec.split(",") if t]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated floats, got {spec!r}") from exc


_MODEL_FLAGS = {
    "bs": ("v",),
    "heston": ("vbar", "lam", "eta", "rho", "v0"),
    "vg": ("sigma", "theta", "nu"),
    "bg": ("alpha_p", "alpha_m", "lambda_p", "lambda_m"),
    "cgmy": ("C", "G", "M", "Y"),
    "merton": ("sigma", "lam", "alpha", "delta"),
}


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=sorted(_MODEL_FLAGS), help="model family")
    p.add_argument("--params", metavar="FILE", help="JSON file with model+parameters")
    p.add_argument("--v", type=float, help="bs: annualized variance")
    p.add_argument("--vbar", type=float, help="heston: long-run variance")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="heston: mean reversion / bg+merton: see model")
    p.add_argument("--eta", type=float, help="heston: vol of vol")
    p.add_argument("--rho", type=float, help="heston: correlation")
    p.add_argument("--v0", type=float, help="heston: initial variance (pricing only)")
    p.add_argument("--sigma", type=float, help="vg/merton: volatility")
    p.add_argument("--theta", type=float, help="vg: drift")
    p.add_argument("--nu", type=float, help="vg: time-change variance")
    p.add_argument("--alpha-p", dest="alpha_p", type=float, help="bg: up intensity")
    p.add_argument("--alpha-m", dest="alpha_m", type=float, help="bg: down intensity")
    p.add_argument("--lambda-p", dest="lambda_p", type=float, help="bg: up inverse scale")
    p.add_argument("--lambda-m", dest="lambda_m", type=float, help="bg: down inverse scale")
    p.add_argument("--C", type=float, help="cgmy: C")
    p.add_argument("--G", type=float, help="cgmy: G")
    p.add_argument("--M", type=float, help="cgmy: M")
    p.add_argument("--Y", type=float, help="cgmy: Y")
    p.add_argument("--alpha", type=float, help="merton: jump-size mean")
    p.add_argument("--delta", type=float, help="merton: jump-size s.d.")


def _build_model(args) -> ModelSpec:
    if args.params:
        with open(args.params, encoding="utf-8") as fh:
            blob = json.load(fh)
        name = blob.pop("model", None)
        if name not in _MODEL_FLAGS:
            raise UsageError(f"--params file needs a 'model' key in {sorted(_MODEL_FLAGS)}")
        return _model_from_mapping(name, blob)
    if not args.model:
        raise UsageError("either --model with flags or --params FILE is required")
    fields = {}
    for f in _MODEL_FLAGS[args.model]:
        val = getattr(args, f, None)
        if val is None and not (args.model == "heston" and f == "v0"):
            raise UsageError(f"--model {args.model} requires --{f.replace('_', '-')}")
        if val is not None:
            fields[f] = val
    return _model_from_mapping(args.model, fields)


def _model_from_mapping(name: str, kv: dict) -> ModelSpec:
    try:
        if name == "bs":
            return BSParams(v=kv["v"])
        if name == "heston":
            return HestonParams(
                v_bar=kv.get("vbar", kv.get("v_bar")),
                lam=kv["lam"],
                eta=kv["eta"],
                rho=kv["rho"],
                v0=kv.get("v0"),
            )
        if name == "vg":
            return VGParams(sigma=kv["sigma"], theta=kv["theta"], nu=kv["nu"])
        if name == "bg":
            return BGParams(kv["alpha_p"], kv["alpha_m"], kv["lambda_p"], kv["lambda_m"])
        if name == "cgmy":
            return CGMYParams(kv["C"], kv["G"], kv["M"], kv["Y"])
        if name == "merton":
            return MertonParams(
                sigma=kv["sigma"], lam=kv["lam"], alpha=kv["alpha"], delta=kv["delta"]
            )
    except KeyError as exc:
        raise UsageError(f"missing parameter {exc} for model {name}")
    raise UsageError(f"unknown model {name}")


def _open_out(path):
    if path in (None, "-"):
        import contextlib

        return contextlib.nullcontext(sys.stdout)  # never close stdout
    return open(path, "w", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_smile(args) -> int:
    model = _build_model(args)
    x = _parse_grid(args.x)
    sl = smile.smile_slice(model, x)
    with _open_out(args.output) as fh:
        fh.write("x,omega,omega_bar,v,vol\n")
        for i in range(sl.x_grid.size):
            fh.write(
                ",".join(
                    _fmt(t)
                    for t in (
                        sl.x_grid[i],
                        sl.omega[i],
                        sl.omega_bar[i],
                        sl.v[i],
                        math.sqrt(sl.v[i]),
                    )
                )
                + "\n"
            )
    return 0


def _cmd_converge(args) -> int:
    model = _build_model(args)
    T_list = _parse_list(args.T)
    x = _parse_grid(args.x) if ":" in args.x else np.array(_parse_list(args.x))
    rows = pricer.convergence_study(model, T_list, x)
    with _open_out(args.output) as fh:
        fh.write("model,T,x,vol_fft,vol_limit,abs_err\n")
        for r in rows:
            fh.write(
                f"{r.model},{_fmt(r.T)},{_fmt(r.x)},{_fmt(r.vol_fft)},"
                f"{_fmt(r.vol_limit)},{_fmt(r.abs_err)}\n"
            )
    return 0


def _cmd_moments(args) -> int:
    model = _build_model(args)
    me = moments.w_expansion_coeffs(model)
    bm, bp, pt, qt = moments.lee_wings(model)
    blob = {
        "psi0": me.psi0,
        "ubar0": me.ubar0,
        "m2": me.m2,
        "m3": me.m3,
        "m4": me.m4,
        "w_coeffs": list(me.w_coeffs),
        "beta_minus": bm,
        "beta_plus": bp,
        "p_tilde": pt if math.isfinite(pt) else None,
        "q_tilde": qt if math.isfinite(qt) else None,
    }
    with _open_out(args.output) as fh:
        if args.format == "json":
            json.dump(blob, fh, indent=2)
            fh.write("\n")
        else:
            keys = [k for k in blob if k != "w_coeffs"]
            fh.write(",".join(keys + [f"w{j}" for j in range(5)]) + "\n")
            vals = [blob[k] for k in keys] + list(me.w_coeffs)
            fh.write(",".join("" if v is None else _fmt(v) for v in vals) + "\n")
    return 0


def _cmd_calibrate(args) -> int:
    import pandas.errors

    try:
        chain = calib.load_chain_csv(args.input)
    except pandas.errors.EmptyDataError:
        chain = []
    if not chain:
        raise UsageError("no slices parsed")
    guess = BGParams(*(args.guess or (10.0, 0.6, 35.0, 5.0)))
    report = calib.calibrate_surface(chain, guess, seed=args.seed)
    with _open_out(args.output) as fh:
        json.dump(calib.report_to_dict(report), fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_arbcheck(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        blob = json.load(fh)
    pairs = [
        (s["T"], BGParams(s["alpha_p"], s["alpha_m"], s["lambda_p"], s["lambda_m"]))
        for s in blob["slices"]
    ]
    k = _parse_grid(args.k)
    min_density = min(
        calib.butterfly_min_density(lambda kk, t=t, p=p: calib.bgi_total_variance(p, kk, t), k)
        for t, p in pairs
    )
    flags, min_gap = calib.calendar_check(pairs, k_grid=k)
    out = {
        "butterfly_ok": bool(min_density >= 0.0),
        "calendar_ok": bool(all(flags)) if flags else True,
        "min_density": min_density,
        "min_w_gap": min_gap if math.isfinite(min_gap) else None,
    }
    with _open_out(args.output) as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_density(args) -> int:
    model = _build_model(args)
    k = _parse_grid(args.k)
    dens = calib.implied_density(
        lambda kk: smile.total_variance(model, kk, args.T), k
    )
    with _open_out(args.output) as fh:
        fh.write("k,density\n")
        for ki, di in zip(k, np.atleast_1d(dens)):
            fh.write(f"{_fmt(ki)},{_fmt(di)}\n")
    return 0


def _cmd_smalltime(args) -> int:
    model = _build_model(args)
    k = _parse_grid(args.k)
    with _open_out(args.output) as fh:
        fh.write("k,w0\n")
        for ki in k:
            fh.write(f"{_fmt(ki)},{_fmt(smile.small_time_total_variance(model, float(ki)))}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="levysmile", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("smile", help="large-time variance smile on a strike grid")
    _add_model_args(sp)
    sp.add_argument("--x", required=True, metavar="MIN:MAX:N", help="strike grid")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_smile)

    sp = sub.add_parser("converge", help="finite-T implied vols vs the large-time limit")
    _add_model_args(sp)
    sp.add_argument("--T", required=True, help="comma-separated maturities")
    sp.add_argument("--x", required=True, help="grid MIN:MAX:N or comma list")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_converge)

    sp = sub.add_parser("moments", help="near-the-money expansion and wing skews")
    _add_model_args(sp)
    sp.add_argument("--format", choices=("csv", "json"), default="json")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_moments)

    sp = sub.add_parser("calibrate", help="fit the surface parametrization to a chain CSV")
    sp.add_argument("--input", required=True, help="chain CSV (vol or price form)")
    sp.add_argument("--output", "-o", default="-")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--guess", type=float, nargs=4, metavar=("AP", "AM", "LP", "LM"))
    sp.set_defaults(func=_cmd_calibrate)

    sp = sub.add_parser("arbcheck", help="butterfly/calendar diagnostics for a report")
    sp.add_argument("--report", required=True, help="calibration report JSON")
    sp.add_argument("--k", default="-1.5:1.5:3001", metavar="MIN:MAX:N")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_arbcheck)

    sp = sub.add_parser("density", help="implied terminal density of a model slice")
    _add_model_args(sp)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--k", required=True, metavar="MIN:MAX:N")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_density)

    sp = sub.add_parser("smalltime", help="short-maturity total-variance limit")
    _add_model_args(sp)
    sp.add_argument("--k", required=True, metavar="MIN:MAX:N")
    sp.add_argument("--output", "-o", default="-")
    sp.set_defaults(func=_cmd_smalltime)

    return p


_GRID_FLAGS = {"--x", "--k", "--T"}


def _normalize_argv(argv) -> list[str]:
    # join grid/list flags with their value: argparse would misread
    # "--x -1:1:401" as a dangling option otherwise
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if tok in _GRID_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = build_parser().parse_args(_normalize_argv(list(argv)))
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SmileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

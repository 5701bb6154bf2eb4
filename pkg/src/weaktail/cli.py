"""Command-line interface.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
values read from the file.  Exit codes: 0 success, 2 invalid input,
3 numerical convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    FunctionalRegion,
    SlopeFit,
    TailCurve,
    fit_log_slope,
    marginal_log_tail,
    mc_tail_curve,
    predicted_inverse_chi,
)
from .chi import (
    ChiResult,
    chi_closed_form,
    chi_empirical,
    chi_upper_closed_form,
    chi_upper_empirical,
)
from .copula import spec_from_dict, spec_to_dict
from .errors import ConvergenceError, ValidationError
from .portfolio import (
    PortfolioSpec,
    figure1_spec,
    hrv_quantities,
    hrv_sharp_asymptote,
    portfolio_sigma_matrix,
    portfolio_tail_curve,
    predicted_portfolio_slope,
)
from .plotting import plot_tail_curve, predicted_line, write_gnuplot_script, write_line_csv
from .samplers import copula_sampler, exponential_margin, uniform_margin, with_margins
from .simplex import (
    MixtureParams,
    as_sym_matrix,
    brute_force_simplex_min,
    c_star_theta,
    min_quadratic_on_simplex,
    mixture_polytope_min,
    simplex_lattice_min,
)

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _merge(cfg: dict, args, keys) -> dict:
    """Config values overridden by flags that were given on the command line."""
    out = dict(cfg)
    for key in keys:
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            out[key] = v
    return out


def _copula_from(conf: dict):
    if conf.get("family") is not None:
        params = dict(conf.get("copula", {}).get("params", {})) if conf.get("copula", {}).get("family") == conf["family"] else {}
        for key in ("rho", "theta", "dim"):
            if conf.get(key) is not None:
                params[key] = conf[key]
        if conf.get("corr") is not None:
            params["R"] = _read_matrix(conf["corr"])
        return spec_from_dict({"family": conf["family"], "params": params})
    if "copula" in conf:
        return spec_from_dict(conf["copula"])
    raise ValidationError("a copula is required: pass --family or a config with a 'copula' entry")


def _read_matrix(src) -> np.ndarray:
    if isinstance(src, list):
        return np.asarray(src, dtype=float)
    try:
        m = np.loadtxt(src, delimiter=",", ndmin=2)
    except OSError as e:
        raise OSError(f"cannot read matrix {src}: {e}") from e
    except ValueError as e:
        raise ValidationError(f"matrix file {src} is not numeric CSV: {e}") from None
    return m


def _require_seed(conf: dict) -> int:
    if conf.get("seed") is None:
        raise ValidationError("--seed is required for stochastic commands")
    return int(conf["seed"])


def _thresholds(conf: dict, default) -> np.ndarray:
    if conf.get("thresholds") is not None:
        return np.asarray(conf["thresholds"], dtype=float)
    lo, hi, num = conf.get("tmin", default[0]), conf.get("tmax", default[1]), int(conf.get("num", default[2]))
    if conf.get("spacing", default[3]) == "log":
        if not 0 < lo < hi:
            raise ValidationError("log spacing needs 0 < tmin < tmax")
        return np.logspace(math.log10(lo), math.log10(hi), num)
    return np.linspace(lo, hi, num)


# --------------------------------------------------------------------------- chi


def _chi_payload(res: ChiResult) -> dict:
    return {"value": res.value, "method": res.method, "diagnostics": res.diagnostics}


def cmd_chi(args) -> int:
    conf = _merge(_load_config(args.config), args,
                  ["family", "rho", "theta", "dim", "corr", "lambda", "method", "tail", "accuracy"])
    spec = _copula_from(conf)
    lam = conf.get("lambda")
    if lam is None:
        raise ValidationError("--lambda is required")
    method, upper = conf.get("method", "closed"), conf.get("tail", "lower") == "upper"
    acc = float(conf.get("accuracy", 1e-3))
    results = {}
    if method in ("closed", "both"):
        results["closed_form"] = (chi_upper_closed_form if upper else chi_closed_form)(spec, lam)
    if method in ("empirical", "both"):
        emp = chi_upper_empirical if upper else chi_empirical
        results["empirical"] = emp(spec, lam, conf.get("u_sequence"), acc)
    if not results:
        raise ValidationError(f"unknown method {method!r}")
    payload = {"copula": spec_to_dict(spec), "lambda": list(lam), "tail": "upper" if upper else "lower",
               "results": {k: _chi_payload(v) for k, v in results.items()}}
    lines = [f"{k}: chi = {v.value:.12g}" for k, v in results.items()]
    if "empirical" in results:
        d = results["empirical"].diagnostics
        lines.append(f"empirical raw last ratio = {d['raw_last']:.12g}, converged = {d['converged']}")
    if len(results) == 2:
        gap = abs(results["closed_form"].value - results["empirical"].value)
        payload["discrepancy"] = gap
        lines.append(f"discrepancy = {gap:.3g}")
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------- tail-mc


_MARGINS = {"uniform": uniform_margin, "exponential": exponential_margin}


def cmd_tail_mc(args) -> int:
    conf = _merge(_load_config(args.config), args,
                  ["family", "rho", "theta", "dim", "corr", "margins", "functional", "thresholds", "tmin", "tmax",
                   "num", "spacing", "samples", "seed", "workers", "out", "min_hits", "plot"])
    spec = _copula_from(conf)
    seed = _require_seed(conf)
    names = conf.get("margins", "uniform")
    names = names.split(",") if isinstance(names, str) else list(names)
    if len(names) == 1:
        names = names * spec.dim
    try:
        margins = [_MARGINS[n.strip()]() for n in names]
    except KeyError as e:
        raise ValidationError(f"unknown margin {e}; choose from {sorted(_MARGINS)}") from None
    kind = conf.get("functional", "max")
    functional = FunctionalRegion(kind)
    upper = functional.upper
    default = (1.0, 6.0, 12, "linear") if upper else (1e-3, 1e-1, 15, "log")
    thresholds = _thresholds(conf, default)
    samples = int(conf.get("samples", 10 ** 6))
    curve = mc_tail_curve(with_margins(copula_sampler(spec), margins), functional, thresholds, samples, seed,
                          int(conf.get("workers", 1)))
    out = conf.get("out", "tail.csv")
    curve.write_csv(out)
    lam = [m.lambda_slope for m in margins]
    try:
        chi = (chi_upper_closed_form if upper else chi_closed_form)(spec, lam)
        predicted = predicted_inverse_chi(chi)
    except ValidationError:
        predicted = None
    fit = fit_log_slope(curve, int(conf.get("min_hits", 20)), marginal_log_tail(margins, upper))
    payload = {"csv": str(out), "fitted_slope": fit.slope, "r_squared": fit.r_squared,
               "predicted_inverse_chi": predicted, "rows_used": fit.rows_used.tolist()}
    lines = [f"wrote {out}", f"fitted slope = {fit.slope:.6g} (r^2 = {fit.r_squared:.6f})"]
    if predicted is not None:
        lines.append(f"predicted 1/chi = {predicted:.6g}, ratio = {fit.slope / predicted:.4f}")
        payload["ratio"] = fit.slope / predicted
    if conf.get("plot"):
        plot_tail_curve(conf["plot"], curve, predicted if predicted is not None else fit.slope, fit,
                        xlabel="t", ylabel="P[event]")
        lines.append(f"wrote {conf['plot']}")
        payload["png"] = str(conf["plot"])
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------- bs-portfolio


def cmd_bs_portfolio(args) -> int:
    conf = _merge(_load_config(args.config), args,
                  ["samples", "seed", "workers", "tmin", "tmax", "num", "fit_max", "outdir", "hrv", "variant",
                   "no_png"])
    if args.figure1:
        spec = figure1_spec()
    elif "portfolio" in conf:
        spec = PortfolioSpec.from_dict(conf["portfolio"])
    elif "B" in conf:
        spec = PortfolioSpec.from_dict(conf)
    else:
        raise ValidationError("a portfolio is required: --figure1 or a config with B, mu, T, legs")
    seed = _require_seed(conf)
    conf.setdefault("spacing", "log")
    thresholds = _thresholds(conf, (1e-4, 1e-1, 25, "log"))
    samples = int(conf.get("samples", 10 ** 7))
    outdir = Path(conf.get("outdir", "."))
    outdir.mkdir(parents=True, exist_ok=True)

    predicted = predicted_portfolio_slope(spec)
    curve = portfolio_tail_curve(spec, thresholds, samples, seed, int(conf.get("workers", 1)))
    fit_max = float(conf.get("fit_max", 1e-2))
    mask = thresholds <= fit_max * (1 + 1e-12)
    fit = fit_log_slope(TailCurve(thresholds[mask], curve.hits[mask], samples), 20)
    fit_rows = np.flatnonzero(mask)[fit.rows_used]

    fit_full = SlopeFit(fit.slope, fit.intercept, fit.r_squared, fit_rows)
    line = predicted_line(curve, predicted, fit_full, points=len(thresholds))
    line[:, 0] = thresholds
    extra, extra_plot, hrv_payload = None, None, None
    if conf.get("hrv"):
        q = hrv_quantities(spec, conf.get("variant") or "original")
        asym = hrv_sharp_asymptote(q, np.minimum(thresholds, 1 - 1e-12))
        extra = {"asymptote": asym}
        extra_plot = (thresholds, asym, f"sharp asymptote ({q.variant})")
        hrv_payload = {"eta": q.eta, "gamma": q.gamma, "nu0_A": q.nu0_A, "exponent": q.exponent,
                       "variant": q.variant, "C": list(q.C), "c": list(q.c)}

    tail_csv, line_csv, gp, png = (outdir / n for n in ("tail.csv", "line.csv", "plot.gp", "tail.png"))
    curve.write_csv(tail_csv)
    write_line_csv(line_csv, line, extra)
    write_gnuplot_script(gp, tail_csv.name, line_csv.name, predicted, png=None,
                         extra_column="sharp asymptote" if extra else None)
    written = [tail_csv, line_csv, gp]
    if not conf.get("no_png"):
        plot_tail_curve(png, curve, predicted, fit_full, extra_plot)
        written.append(png)

    payload = {"predicted_slope": predicted, "fitted_slope": fit.slope, "r_squared": fit.r_squared,
               "fit_range": [float(thresholds[fit_rows[0]]), float(thresholds[fit_rows[-1]])],
               "sigma_matrix": portfolio_sigma_matrix(spec), "files": [str(p) for p in written],
               "samples": samples, "seed": seed}
    lines = [f"predicted slope = {predicted:.10g}",
             f"fitted slope = {fit.slope:.6g} over z in [{payload['fit_range'][0]:.3g}, {payload['fit_range'][1]:.3g}]"
             f" (relative gap {abs(fit.slope / predicted - 1):.3%})"]
    if hrv_payload:
        payload["hrv"] = hrv_payload
        lines.append(f"eta = {q.eta:.10g}, gamma = {q.gamma:.10g}, nu0(A) = {q.nu0_A:.10g} ({q.variant})")
    lines += [f"wrote {p}" for p in written]
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------- optimize


def cmd_optimize(args) -> int:
    conf = _merge(_load_config(args.config), args,
                  ["matrix", "kind", "mu", "theta", "lambda", "tol", "oracle", "resolution"])
    if conf.get("matrix") is None:
        raise ValidationError("--matrix is required")
    m = _read_matrix(conf["matrix"])
    kind = conf.get("kind", "quadratic")
    tol = float(conf.get("tol", 1e-10))
    res = int(conf.get("resolution", 200))
    payload = {"kind": kind}
    if kind == "quadratic":
        sol = min_quadratic_on_simplex(m, tol=tol)
        payload.update(value=sol.value, argmin=sol.argmin, kkt_residual=sol.kkt_residual, iterations=sol.iterations)
        lines = [f"value = {sol.value:.12g}", "argmin = " + ",".join(f"{w:.10g}" for w in sol.argmin),
                 f"kkt residual = {sol.kkt_residual:.3g}"]
        if conf.get("oracle"):
            payload["oracle"] = brute_force_simplex_min(m, res)
    elif kind == "c-star":
        B = as_sym_matrix(m)
        mu = np.asarray(conf.get("mu") or [0.0] * B.shape[0], dtype=float)
        theta = float(conf.get("theta", 1.0))
        val = c_star_theta(B, mu, theta, tol=tol)
        payload["value"] = val
        lines = [f"value = {val:.12g}"]
        if conf.get("oracle"):
            def den(W):
                mw = W @ mu
                return np.sqrt(2 * theta * np.einsum("ij,jk,ik->i", W, B, W) + mw * mw) - mw
            payload["oracle"] = 2 * theta / simplex_lattice_min(den, B.shape[0], res)
    elif kind == "mixture":
        R = as_sym_matrix(m, correlation=True)
        lam = conf.get("lambda") or [1.0] * R.shape[0]
        params = MixtureParams(R, conf.get("mu") or [0.0] * R.shape[0], float(conf.get("theta", 1.0)), lam)
        val = mixture_polytope_min(params, tol=tol)
        payload["value"] = val
        lines = [f"value = {val:.12g}"]
        if conf.get("oracle"):
            a, mt, th = params.budget_weights, params.mu_tilde, params.theta

            def obj(W):
                V = W / a
                mv = V @ mt
                return np.sqrt(2 * th * np.einsum("ij,jk,ik->i", V, R, V) + mv * mv) - mv
            payload["oracle"] = simplex_lattice_min(obj, R.shape[0], res)
    else:
        raise ValidationError(f"unknown problem kind {kind!r}")
    if "oracle" in payload:
        lines.append(f"oracle (resolution {res}) = {payload['oracle']:.12g}")
        payload["oracle_gap"] = abs(payload["oracle"] - payload["value"])
    _emit(args, payload, lines)
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _copula_flags(p):
    p.add_argument("--family", help="independence, comonotone, gaussian, gumbel, clayton, custom-slow, gumbel-ev, mixture")
    p.add_argument("--rho", type=float, help="bivariate correlation")
    p.add_argument("--corr", help="correlation matrix CSV file")
    p.add_argument("--theta", type=float, help="family parameter")
    p.add_argument("--dim", type=int, help="dimension for independence, comonotone and Archimedean families")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="weaktail", description="Weak tail dependence functions and log-scale tail checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("chi", help="weak tail dependence function")
    common(p)
    _copula_flags(p)
    p.add_argument("--lambda", dest="lambda", type=_floats, help="exponents, e.g. 1,1")
    p.add_argument("--method", choices=["closed", "empirical", "both"])
    p.add_argument("--tail", choices=["lower", "upper"])
    p.add_argument("--accuracy", type=float)
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("tail-mc", help="Monte Carlo tail curve and log-slope fit")
    common(p)
    _copula_flags(p)
    p.add_argument("--margins", help="uniform or exponential, one name or a comma list")
    p.add_argument("--functional", choices=["min", "max", "sum"])
    p.add_argument("--thresholds", type=_floats)
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--spacing", choices=["log", "linear"])
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--min-hits", dest="min_hits", type=int)
    p.add_argument("--out", help="CSV output path (default tail.csv)")
    p.add_argument("--plot", help="optional PNG output path")
    p.set_defaults(func=cmd_tail_mc)

    p = sub.add_parser("bs-portfolio", help="option portfolio tail, predicted slope and figure")
    common(p)
    p.add_argument("--figure1", action="store_true", help="three identical calls of the reference example")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--tmin", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--fit-max", dest="fit_max", type=float, help="upper end of the fitted z range (default 1e-2)")
    p.add_argument("--outdir")
    p.add_argument("--hrv", action="store_true", default=None, help="two identical legs: sharp asymptote column")
    p.add_argument("--variant", choices=["original", "corrected"])
    p.add_argument("--no-png", dest="no_png", action="store_true", default=None)
    p.set_defaults(func=cmd_bs_portfolio)

    p = sub.add_parser("optimize", help="simplex-constrained minimizations")
    common(p)
    p.add_argument("--matrix", help="CSV matrix file")
    p.add_argument("--kind", choices=["quadratic", "c-star", "mixture"])
    p.add_argument("--mu", type=_floats)
    p.add_argument("--theta", type=float)
    p.add_argument("--lambda", dest="lambda", type=_floats)
    p.add_argument("--tol", type=float)
    p.add_argument("--oracle", action="store_true", default=None)
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as e:
        print(f"convergence failure: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Subcommands
-----------
fit
    Fit a sample and write the result record plus curve files.
simulate
    Draw samples (optionally several replications, optionally fitted).
certify
    Recheck a stored model against a sample.
selftest
    Small end-to-end smoke run.

Exit codes: 0 success, 1 certificate failed, 2 I/O error, 3 invalid
data or model, 4 no convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .data import Kind, Setting, SolverConfig, ingest, read_csv, write_csv
from .errors import InvalidEnvelope, InvalidInput, ShapeMLEError, DegenerateSample
from .measures import measure_for
from .objective import directional_kink
from .simulate import (
    RngStream,
    example_2b,
    gauss_sample,
    sample_piecewise_logaffine,
    simulate_2a,
    simulate_2b,
)
from .solver import certify, fit
from .spline import SplineParams, evaluate

EXIT_OK, EXIT_CERT, EXIT_IO, EXIT_DATA, EXIT_NOCONV = 0, 1, 2, 3, 4


class _Fail(Exception):
    def __init__(self, code, msg):
        super().__init__(code, msg)
        self.code = code
        self.msg = msg

    def __str__(self):
        return self.msg


def _setting(args) -> Setting:
    return Setting.from_label(args.setting, alpha=args.alpha, beta=args.beta)


def _config(args, setting) -> SolverConfig:
    return SolverConfig(
        setting,
        delta1=args.delta1,
        delta2=args.delta2,
        seed=args.seed,
        multi_knot=getattr(args, "multi_knot", False),
        gaussian_start=getattr(args, "gaussian_start", False),
    )


def _read_sample(path):
    try:
        return read_csv(path)
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot read {path}: {e}") from None
    except (InvalidInput, DegenerateSample) as e:
        raise _Fail(EXIT_DATA, f"{path}: {e}") from None


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot write {path}: {e}") from None


def _dump(record) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def curve_range(sample, params: SplineParams):
    """Interval spanned by the emitted curves (the certificate audit range)."""
    x = sample.points
    if params.kind is Kind.LOG_CONCAVE:
        return float(x[0]), float(x[-1])
    if params.kind is Kind.TAIL_GAUSS:
        return float(x[0] - 4 * sample.std), float(x[-1] + 4 * sample.std)
    return 0.0, float(x[-1] + 4 / params.setting.beta)


def write_curves(prefix, sample, params: SplineParams, grid: int = 2001):
    """Write ``<prefix>_theta.csv``, ``<prefix>_density.csv`` and ``<prefix>_h.csv``."""
    lo, hi = curve_range(sample, params)
    t = np.linspace(lo, hi, grid)
    th = evaluate(params, t)
    ref = measure_for(params.setting).density(t)
    h = directional_kink(sample, params, t)
    try:
        write_csv(f"{prefix}_theta.csv", [t, th], ["x", "theta"])
        write_csv(f"{prefix}_density.csv", [t, np.exp(th) * ref, ref], ["x", "density", "reference"])
        write_csv(f"{prefix}_h.csv", [t, h], ["t", "h"])
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot write curves: {e}") from None


def _fit_one(sample, config):
    try:
        return fit(sample, config), None
    except InvalidInput as e:
        raise _Fail(EXIT_DATA, str(e)) from None
    except ShapeMLEError as e:
        return None, f"{type(e).__name__}: {e}"


def cmd_fit(args) -> int:
    setting = _setting(args)
    sample = _read_sample(args.input)
    res, err = _fit_one(sample, _config(args, setting))
    if res is None:
        _write_text(f"{args.out}.json", _dump({"setting": setting.label, "converged": False,
                                                "error": err}))
        print(err, file=sys.stderr)
        return EXIT_NOCONV
    _write_text(f"{args.out}.json", _dump(res.to_record()))
    write_curves(args.out, sample, res.params, args.grid)
    print(f"loglik {res.loglik:.12g}  knots {res.model.dset.size}  "
          f"newton {res.newton_steps}  local searches {res.local_searches}  "
          f"certificate {'passed' if res.certificate.passed else 'FAILED'}")
    return EXIT_OK if res.converged else EXIT_NOCONV


def _load_model(path) -> SplineParams:
    try:
        rec = json.loads(Path(path).read_text())
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise _Fail(EXIT_DATA, f"{path}: not JSON ({e})") from None
    try:
        return SplineParams.from_record(rec)
    except (KeyError, TypeError, ValueError, ShapeMLEError) as e:
        raise _Fail(EXIT_DATA, f"{path}: not a model record ({e})") from None


def _model_for_simulation(args, setting):
    if args.model == "example":
        if setting.kind is not Kind.TAIL_GAMMA:
            raise _Fail(EXIT_DATA, "the built-in example model is a Gamma-tail model")
        return example_2b()
    if args.model is None:
        return None
    params = _load_model(args.model)
    if params.setting != setting:
        raise _Fail(EXIT_DATA, f"model setting {params.setting.label} differs from --setting")
    return params


def _draw(setting, params, n, mu, sigma, rng):
    if params is None:
        if setting.kind is Kind.TAIL_GAMMA:
            raise _Fail(EXIT_DATA, "Gamma-tail simulation needs --model")
        return gauss_sample(n, mu, sigma, rng)
    try:
        if setting.kind is Kind.LOG_CONCAVE:
            return sample_piecewise_logaffine(n, params, rng)
        if setting.kind is Kind.TAIL_GAUSS:
            return simulate_2a(n, params, rng)
        return simulate_2b(n, params, setting.alpha, setting.beta, rng)
    except (InvalidEnvelope, InvalidInput) as e:
        raise _Fail(EXIT_DATA, str(e)) from None


def _replicate(job):
    """One replication: draw, write, optionally fit. Runs in a worker process."""
    setting, params, n, mu, sigma, seed, idx, prefix, config, do_fit = job
    x = _draw(setting, params, n, mu, sigma, RngStream(seed, idx))
    path = f"{prefix}_{idx:03d}.csv" if prefix is not None else None
    if path is not None:
        write_csv(path, [x], ["x"])
    rec = {"rep": idx, "n": n}
    if do_fit:
        sample = ingest([(v, 1.0) for v in x])
        res, err = _fit_one(sample, config)
        if res is None:
            rec.update(converged=False, error=err)
        else:
            rec.update(res.to_record())
    return rec


def _threads():
    try:
        return max(1, int(os.environ.get("SHAPEMLE_THREADS", "1")))
    except ValueError:
        return 1


def cmd_simulate(args) -> int:
    setting = _setting(args)
    params = _model_for_simulation(args, setting)
    if args.n < 1 or args.reps < 1:
        raise _Fail(EXIT_DATA, "--n and --reps must be positive")
    config = _config(args, setting)
    if args.reps == 1 and not args.fit:
        x = _draw(setting, params, args.n, args.mu, args.sigma, RngStream(args.seed, 0))
        try:
            write_csv(args.out, [x], ["x"])
        except OSError as e:
            raise _Fail(EXIT_IO, f"cannot write {args.out}: {e}") from None
        return EXIT_OK
    prefix = str(args.out)
    if prefix.endswith(".csv"):
        prefix = prefix[:-4]
    jobs = [(setting, params, args.n, args.mu, args.sigma, args.seed, i, prefix, config, args.fit)
            for i in range(args.reps)]
    workers = min(_threads(), args.reps)
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                recs = list(ex.map(_replicate, jobs))
        else:
            recs = [_replicate(j) for j in jobs]
    except OSError as e:
        raise _Fail(EXIT_IO, f"cannot write replications: {e}") from None
    if args.fit:
        _write_text(f"{prefix}_summary.json", _dump({"replications": recs}))
        bad = sum(not r.get("converged", False) for r in recs)
        print(f"{args.reps - bad}/{args.reps} replications converged")
        return EXIT_OK if bad == 0 else EXIT_NOCONV
    return EXIT_OK


def cmd_certify(args) -> int:
    params = _load_model(args.model)
    if args.setting is not None and _setting(args) != params.setting:
        raise _Fail(EXIT_DATA, f"model setting {params.setting.label} differs from --setting")
    sample = _read_sample(args.input)
    if params.kind is Kind.TAIL_GAMMA and sample.points[0] <= 0:
        raise _Fail(EXIT_DATA, "Gamma-tail model needs positive data")
    n = sample.n
    d2 = args.delta2 if args.delta2 is not None else 1e-4 / n
    rep = certify(sample, params, d2)
    rows = [
        ("integral - 1", rep.integral_of_density - 1, rep.tol_mass),
        ("mean residual", rep.mean_match, rep.tol_mass),
        ("max |DL| at knots",
         float(np.max(np.abs(rep.knot_equalities))) if rep.knot_equalities.size else 0.0, rep.tol_h),
        ("max DL on grid", rep.grid_max_h, rep.tol_h),
    ]
    for name, val, tol in rows:
        if val is None:
            print(f"{name:<20} {'n/a':>14}")
        else:
            ok = (abs(val) if name != "max DL on grid" else val) <= tol
            print(f"{name:<20} {val:>14.6e}  tol {tol:.1e}  {'ok' if ok else 'FAIL'}")
    print("passed" if rep.passed else "FAILED")
    if args.out is not None:
        _write_text(args.out, _dump(rep.to_record()))
    return EXIT_OK if rep.passed else EXIT_CERT


def cmd_selftest(args) -> int:
    ok = True
    s = ingest([(0.0, 1.0), (1.0, 1.0)])
    r = fit(s, SolverConfig(Setting.log_concave()))
    good = r.converged and abs(r.loglik) <= 1e-10 and r.model.dset.size == 0
    print(f"two-point log-concave fixture: {'ok' if good else 'FAIL'}")
    ok &= good
    x = gauss_sample(400, 0.5, 1.25, RngStream(args.seed))
    r = fit(ingest([(v, 1.0) for v in x]), SolverConfig(Setting.gauss()))
    good = r.converged and r.certificate.passed
    print(f"Gauss-tail replication n=400: {'ok' if good else 'FAIL'} "
          f"({r.model.dset.size} knots, {r.newton_steps} Newton steps)")
    ok &= good
    x = simulate_2b(400, example_2b(), 1.0, 1.0, RngStream(args.seed))
    r = fit(ingest([(v, 1.0) for v in x]), SolverConfig(Setting.gamma(1.0, 1.0)))
    good = r.converged and r.certificate.passed
    print(f"Gamma-tail replication n=400: {'ok' if good else 'FAIL'} "
          f"({r.model.dset.size} knots, {r.newton_steps} Newton steps)")
    ok &= good
    return EXIT_OK if ok else EXIT_NOCONV


def _positive_int(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("grid size must be at least 2")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shapemle", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, setting_default="1"):
        sp.add_argument("--setting", choices=["1", "2a", "2b"], type=str.lower,
                        default=setting_default)
        sp.add_argument("--alpha", type=float, default=1.0, help="Gamma shape (setting 2b)")
        sp.add_argument("--beta", type=float, default=1.0, help="Gamma rate (setting 2b)")
        sp.add_argument("--delta1", type=float, default=None)
        sp.add_argument("--delta2", type=float, default=None)
        sp.add_argument("--seed", type=_seed, default=0)

    f = sub.add_parser("fit", help="fit a sample")
    common(f)
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--out", required=True, help="output prefix")
    f.add_argument("--grid", type=_positive_int, default=2001)
    f.add_argument("--multi-knot", action="store_true")
    f.add_argument("--gaussian-start", action="store_true")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="draw samples")
    common(s, "2a")
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--model", default=None,
                   help="model JSON, or 'example' for the built-in Gamma-tail model")
    s.add_argument("--mu", type=float, default=0.5, help="mean of the Gaussian sample without --model")
    s.add_argument("--sigma", type=float, default=1.25)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--fit", action="store_true", help="also fit every replication")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("certify", help="check a stored model against a sample")
    c.add_argument("--model", required=True)
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--setting", choices=["1", "2a", "2b"], type=str.lower, default=None)
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--beta", type=float, default=1.0)
    c.add_argument("--delta2", type=float, default=None)
    c.add_argument("--out", default=None, help="write the residuals as JSON")
    c.set_defaults(func=cmd_certify)

    t = sub.add_parser("selftest", help="small end-to-end run")
    t.add_argument("--seed", type=_seed, default=0)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except InvalidInput as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

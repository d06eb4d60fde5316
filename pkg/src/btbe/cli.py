"""Command-line front end: ``btbe fit | monitor | ats | calibrate-mewma | simulate``.

Every run writes a JSON manifest with its inputs.  When ``--out`` is given
the manifest goes next to it as ``<out>.manifest.json``; otherwise it is
printed to stderr.

Exit status: 0 success (no signal), 1 monitor found signal(s), 2 usage
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
from importlib import metadata

import numpy as np

from . import chart as ch
from . import estimation as est
from . import mewma as mw
from . import performance as perf
from .lifetimes import GbeParams, MobeParams, MobwParams, sample
from .numerics import BtbeError, ConvergenceError, DomainError, RngStream

log = logging.getLogger("btbe")

EXIT_OK, EXIT_SIGNAL, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

FAMILIES = {"gbe": GbeParams, "mobe": MobeParams, "mobw": MobwParams}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


def parse_params(text: str) -> list:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"cannot parse parameters {text!r}") from None


def make_model(family: str, params):
    family = family.lower()
    if family == "mobw-scale":
        if len(params) != 4:
            raise UsageError(f"mobw-scale takes 4 parameters, got {len(params)}")
        try:
            return MobwParams.from_scales(*params)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    if family not in FAMILIES:
        raise UsageError(f"unknown model family {family!r}")
    cls = FAMILIES[family]
    sizes = {"gbe": (2, 3), "mobe": (2, 3), "mobw": (4, 4)}[family]
    if not sizes[0] <= len(params) <= sizes[1]:
        raise UsageError(f"{family} takes {sizes[0]}-{sizes[1]} parameters, got {len(params)}")
    try:
        return cls(*params)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def read_dataset(path: str, scale: float = 1.0, group: str | None = None):
    """Read a headered CSV with columns ``x1`` and ``x2``.

    With ``group`` only rows whose ``group`` column equals it are kept.
    Returns ``(array, n_zero_rows_excluded)``.  Negative or non-numeric
    values raise :class:`DataError` naming the line.
    """
    if not scale > 0:
        raise UsageError("--scale must be positive")
    rows = []
    try:
        fh = sys.stdin if path == "-" else open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x1", "x2"} <= {f.strip() for f in reader.fieldnames}:
            raise DataError(f"{path}: header must contain columns x1,x2")
        reader.fieldnames = [f.strip() for f in reader.fieldnames]
        if group is not None and "group" not in reader.fieldnames:
            raise DataError(f"{path}: --group needs a 'group' column")
        for line, rec in enumerate(reader, start=2):
            if group is not None and (rec["group"] or "").strip() != group:
                continue
            try:
                x1, x2 = float(rec["x1"]), float(rec["x2"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{line}: non-numeric value") from None
            if not (math.isfinite(x1) and math.isfinite(x2)):
                raise DataError(f"{path}:{line}: non-finite value")
            if x1 < 0 or x2 < 0:
                raise DataError(f"{path}:{line}: negative event time")
            rows.append((x1 * scale, x2 * scale))
    x = np.array(rows, dtype=float).reshape(-1, 2)
    kept, dropped = est.drop_zero_rows(x)
    if dropped:
        log.warning("excluded %d row(s) with a zero event time", dropped)
    return kept, dropped


def write_dataset(x, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x1", "x2"])
    for a, b in x:
        w.writerow([repr(float(a)), repr(float(b))])


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def _emit_manifest(args, extra: dict):
    man = {
        "command": args.command,
        "tool": "btbe",
        "version": _version(),
        **{k: v for k, v in vars(args).items() if k not in ("func",)},
        **extra,
    }
    text = json.dumps(man, indent=2, sort_keys=True, default=str)
    if getattr(args, "out", None) not in (None, "-"):
        with open(args.out + ".manifest.json", "w") as fh:
            fh.write(text + "\n")
    else:
        print(text, file=sys.stderr)


def _need_seed(args):
    if args.seed is None:
        raise UsageError("this command needs an explicit --seed")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")


def _config(args, model) -> ch.ChartConfig:
    if (args.alpha is None) == (args.ats0 is None):
        raise UsageError("give exactly one of --alpha and --ats0")
    side = ch.Side.parse(args.side) if args.side else None
    try:
        return ch.ChartConfig(model, ats0=args.ats0, alpha_override=args.alpha, side=side)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _model_dict(m) -> dict:
    return {"family": m.family, "params": list(m.params)}


# ----------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    x, dropped = read_dataset(args.input, args.scale, args.group)
    fam = args.model.lower()
    try:
        if fam == "gbe":
            res = est.fit_gbe(x)
        elif fam == "mobe":
            res = est.fit_mobe(x)
        elif fam in ("mobw-i1", "mobw"):
            res = est.fit_mobw_em_i1(x)
        else:
            raise UsageError(f"unknown fit family {args.model!r}")
    except (est.DegenerateDataError, DomainError) as exc:
        raise DataError(str(exc)) from None
    out = {**_model_dict(res.model), "n_used": res.n_used, "n_excluded": dropped,
           "iterations": res.iterations, "converged": res.converged, "loglik": res.loglik,
           "means": [float(v) for v in x.mean(axis=0)] if len(x) else None}
    if isinstance(res.model, MobwParams):
        out["scales"] = list(res.model.scales)
    with _open_out(args.out) as fh:
        if args.json:
            fh.write(json.dumps(out, indent=2) + "\n")
        else:
            fh.write(f"model      {res.model.family}\n")
            fh.write("params     " + ", ".join(f"{v:.6g}" for v in res.model.params) + "\n")
            if "scales" in out:
                fh.write("scales     " + ", ".join(f"{v:.6g}" for v in out["scales"]) + "\n")
            fh.write(f"n_used     {res.n_used}\nn_excluded {dropped}\n")
            fh.write(f"iterations {res.iterations}\nconverged  {res.converged}\nloglik     {res.loglik:.6f}\n")
    _emit_manifest(args, {"result": out})
    return EXIT_OK


def cmd_monitor(args) -> int:
    model = make_model(args.model, parse_params(args.params))
    cfg = _config(args, model)
    x, dropped = read_dataset(args.input, args.scale, args.group) if args.input else (np.zeros((0, 2)), 0)
    points = list(ch.monitor(cfg, x))
    with _open_out(args.out) as fh:
        ch.write_chart_csv(points, fh)
    lim = ch.first_event_limits(cfg)
    sig = [p for p in points if p.signal]
    lcl = "-" if lim.lcl is None else f"{lim.lcl:.6g}"
    print(f"alpha={cfg.alpha:.6g} LCL1={lcl} UCL1={lim.ucl:.6g}", file=sys.stderr)
    if sig:
        s = sig[0]
        print(f"first signal at event {s.event_index} (rank {s.signal_rank}); "
              f"{len(sig)} signal(s) in {len(points)} events", file=sys.stderr)
    else:
        print(f"no signal in {len(points)} events", file=sys.stderr)
    _emit_manifest(args, {"alpha": cfg.alpha, "lcl1": lim.lcl, "ucl1": lim.ucl, "n_excluded": dropped,
                          "signals": [p.event_index for p in sig]})
    return EXIT_SIGNAL if sig else EXIT_OK


def _ats_one(family, ic_p, oc_p, side, ats0, method, reps, seed, workers):
    ic, oc = make_model(family, ic_p), make_model(family, oc_p)
    side = ch.Side.parse(side) if side else None
    sc = perf.ShiftScenario(ic, oc, side)
    try:
        alpha = ch.alpha_from_ats0(ic, ats0)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if method == "closed":
        if isinstance(ic, GbeParams) and (ic.delta < 1 or oc.delta < 1):
            raise UsageError("no closed form for GBE with delta < 1; use --method numeric or mc")
        return perf.ats_closed_form(sc, alpha)
    if method == "numeric":
        return perf.ats_theorem3(sc, alpha)
    if method == "mc":
        if seed is None:
            raise UsageError("--method mc needs an explicit --seed")
        return perf.ats_monte_carlo(sc, alpha, reps, RngStream(seed), workers=workers)
    raise UsageError(f"unknown method {method!r}")


def read_batch(path: str) -> list:
    """Lines ``family ic_params oc_params side ats0 [label]``; ``#`` starts a comment."""
    out = []
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 5:
                raise DataError(f"{path}:{line_no}: expected 'family ic oc side ats0 [label]'")
            try:
                ats0 = float(parts[4])
            except ValueError:
                raise DataError(f"{path}:{line_no}: bad ats0 {parts[4]!r}") from None
            out.append((parts[0], parts[1], parts[2], parts[3], ats0, " ".join(parts[5:])))
    return out


def cmd_ats(args) -> int:
    workers = args.threads or perf.default_workers()
    if args.batch:
        rows = read_batch(args.batch)
    else:
        if args.params is None or args.oc_params is None or args.ats0 is None:
            raise UsageError("give --params, --oc-params and --ats0, or --batch")
        rows = [(args.model, args.params, args.oc_params, args.side or "", args.ats0, "")]
    results = []
    for fam, ic_s, oc_s, side, ats0, label in rows:
        side = None if side in ("", "default", "-") else side
        e = _ats_one(fam, parse_params(ic_s), parse_params(oc_s), side, ats0, args.method,
                     args.reps, args.seed, workers)
        results.append({"family": fam, "ic": ic_s, "oc": oc_s, "side": side or "default", "ats0": ats0,
                        "label": label, "ats": e.value, "method": e.method, "stderr": e.stderr,
                        "reps": e.reps, "censored": e.censored})
    with _open_out(args.out) as fh:
        if args.json:
            fh.write(json.dumps(results, indent=2) + "\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["family", "ic", "oc", "side", "ats0", "label", "method", "ats", "stderr"])
            for r in results:
                w.writerow([r["family"], r["ic"], r["oc"], r["side"], r["ats0"], r["label"], r["method"],
                            f"{r['ats']:.4f}", "" if r["stderr"] is None else f"{r['stderr']:.4f}"])
    _emit_manifest(args, {"results": results})
    return EXIT_OK


def cmd_calibrate_mewma(args) -> int:
    _need_seed(args)
    if args.ats0 is None or not args.ats0 > 0:
        raise UsageError("--ats0 must be positive")
    model = make_model("gbe", parse_params(args.params))
    h = mw.calibrate_h(model, args.r, args.ats0, args.reps, RngStream(args.seed))
    with _open_out(args.out) as fh:
        fh.write(json.dumps({"h": h, "r": args.r, "ats0": args.ats0}) + "\n" if args.json else f"{h:.6f}\n")
    _emit_manifest(args, {"h": h})
    return EXIT_OK


def cmd_simulate(args) -> int:
    _need_seed(args)
    if args.n < 0:
        raise UsageError("-n must be >= 0")
    model = make_model(args.model, parse_params(args.params))
    x = sample(model, RngStream(args.seed), args.n)
    with _open_out(args.out) as fh:
        write_dataset(x, fh)
    _emit_manifest(args, {"model_params": _model_dict(model)})
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btbe", description="Bivariate time-between-events control chart.")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True, limits=False, rand=False):
        if model:
            sp.add_argument("--model", default="gbe", help="gbe, mobe, mobw (rates) or mobw-scale")
            sp.add_argument("--params", help="comma separated parameters")
        if limits:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--alpha", type=float)
            g.add_argument("--ats0", type=float)
            sp.add_argument("--side", help="upper or two-sided (default depends on family)")
        if rand:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--reps", type=int, default=100_000)
            sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--json", action="store_true", help="machine-readable output")

    sp = sub.add_parser("fit", help="estimate in-control parameters")
    sp.add_argument("input")
    sp.add_argument("--model", default="gbe", help="gbe, mobe or mobw-i1")
    sp.add_argument("--scale", type=float, default=1.0, help="multiply event times by this factor")
    sp.add_argument("--group", help="keep only rows with this value in the 'group' column")
    sp.add_argument("--out")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("monitor", help="run the chart over a dataset")
    sp.add_argument("input", nargs="?")
    common(sp, limits=True)
    sp.add_argument("--scale", type=float, default=1.0, help="multiply event times by this factor")
    sp.add_argument("--group", help="keep only rows with this value in the 'group' column")
    sp.set_defaults(func=cmd_monitor)

    sp = sub.add_parser("ats", help="average time to signal")
    common(sp, limits=True, rand=True)
    sp.add_argument("--oc-params", help="out-of-control parameters")
    sp.add_argument("--method", choices=("closed", "numeric", "mc"), default="closed")
    sp.add_argument("--batch", help="scenario file")
    sp.set_defaults(func=cmd_ats)

    sp = sub.add_parser("calibrate-mewma", help="MEWMA threshold for a target in-control ATS")
    common(sp, model=False, rand=True)
    sp.add_argument("--params", required=True, help="GBE theta1,theta2,delta")
    sp.add_argument("--r", type=float, default=0.1)
    sp.add_argument("--ats0", type=float, default=200.0)
    sp.set_defaults(func=cmd_calibrate_mewma)

    sp = sub.add_parser("simulate", help="write synthetic event vectors")
    common(sp, rand=True)
    sp.add_argument("-n", type=int, default=100)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="btbe: %(levelname)s: %(message)s")
    if getattr(args, "params", "") is None and args.command in ("monitor", "simulate"):
        parser.error("--params is required")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"btbe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"btbe: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"btbe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, BtbeError) as exc:
        print(f"btbe: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"btbe: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

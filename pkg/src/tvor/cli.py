"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 invalid data, 4 numerical guard.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import baseline, expected, experiments, io, model
from .errors import TvorError, ValidationError
from .histogram import Binning, Histogram, RngSeed, circular_dtv, dtv

log = logging.getLogger("tvor")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="base random seed (default 0, or the config's)")
    g.add_argument("--threads", type=int, default=1, help="worker threads for experiments")
    g.add_argument("--output-dir", type=Path, help="write outputs and manifest.json here")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _binning_args(p):
    p.add_argument("--lo", type=float, help="lower edge for raw values (with --bins)")
    p.add_argument("--hi", type=float, help="upper edge for raw values (with --bins)")
    p.add_argument("--bins", type=int, help="equal-width bin count for raw values")


def _binning(args) -> Binning | None:
    if args.bins is None:
        return None
    if args.lo is None or args.hi is None:
        raise ValidationError("--bins needs --lo and --hi")
    return Binning(args.lo, args.hi, args.bins)


def _ransac_args(p):
    p.add_argument("--ransac", action="store_true", help="fit the model with RANSAC")
    p.add_argument("--threshold", type=float, default=model.RANSAC_THRESHOLD)
    p.add_argument("--iterations", type=int, default=model.RANSAC_ITERATIONS)
    p.add_argument("--min-points", type=int)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="tvor", description="Discrete total variation outliers among histograms.")
    parser.add_argument("--version", action="version", version=f"tvor {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dtv", parents=[common], help="discrete total variation of histograms")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--counts", help="inline counts, e.g. 3,1,4")
    p.add_argument("--circular", action="store_true")
    _binning_args(p)

    p = sub.add_parser("expected", parents=[common], help="expected DTV of uniform histograms")
    p.add_argument("--n", type=_int_list, required=True, help="bin count(s)")
    p.add_argument("--N", type=_int_list, required=True, help="sample size(s)")
    p.add_argument("--method", choices=expected.METHODS, default="exact")

    p = sub.add_parser("theoretical", parents=[common], help="theoretical DTV of a distribution")
    p.add_argument("--dist", required=True, help='e.g. "normal sigma=1 c=5" or "geometric p=0.3"')
    p.add_argument("--n", type=int, help="bin count")
    p.add_argument("--N", type=int, help="also report the upper bound for this sample size")

    p = sub.add_parser("fit", parents=[common], help="fit a*N + b*sqrt(N) to histograms")
    p.add_argument("inputs", nargs="+")
    _ransac_args(p)
    _binning_args(p)

    p = sub.add_parser("score", parents=[common], help="TVOR scores (d' or, with --mc-table, d'')")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", type=Path, help="pre-fitted model JSON")
    p.add_argument("--mc-table", type=Path, help="Monte Carlo table CSV for d'' scores")
    p.add_argument("--extrapolate", action="store_true")
    _ransac_args(p)
    _binning_args(p)

    p = sub.add_parser("baseline", parents=[common], help="leave-one-out chi-squared scores")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--epsilon", type=float, default=baseline.EPSILON)
    _binning_args(p)

    p = sub.add_parser("indices", parents=[common], help="Whipple and Myers indices of value lists")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--range", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--decades", type=int, default=10)

    p = sub.add_parser("mc-table", parents=[common], help="Monte Carlo DTV mean/std table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dist", help="distribution to sample from")
    src.add_argument("--pool", type=Path, help="histogram CSV or value file to subsample")
    p.add_argument("--n", type=int, help="bin count for --dist")
    p.add_argument("--sizes", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--fit-stderr", action="store_true", help="report s in std ~ s*sqrt(N)")

    p = sub.add_parser("simulate", parents=[common], help="synthetic mean-rank experiments")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--trials", type=int, help="override the config's trial count")
    p.add_argument("--kind", choices=("auto", "distribution", "heaping"), default="auto")

    p = sub.add_parser("census", parents=[common], help="score birth-year lists")
    p.add_argument("inputs", nargs="+", help="value files or a directory of them")
    p.add_argument("--reference", type=Path, help="reference census values for d'' scores")
    p.add_argument("--mc-trials", type=int, default=1000)
    p.add_argument("--top", type=int, default=10)
    _ransac_args(p)

    p = sub.add_parser("partition", parents=[common], help="score the groups of one list")
    p.add_argument("inputs", nargs="+", help="value files or a directory of them")
    p.add_argument("--target", required=True, help="label (file stem) of the list to split")
    p.add_argument("--groups", type=Path, required=True,
                   help="one group label per line, aligned with the target's values")
    p.add_argument("--ransac", action="store_true")

    p = sub.add_parser("oracle", parents=[common], help="expected DTV by full enumeration")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--probs", help="comma-separated bin probabilities (default uniform)")
    p.add_argument("--limit", type=int, default=expected.ORACLE_LIMIT)
    return parser


class Output:
    """Collects named outputs and writes them to stdout or an output directory."""

    def __init__(self, args, inputs=()):
        self.args = args
        self.files: dict[str, str] = {}
        self.inputs = inputs

    def add(self, name: str, text: str):
        self.files[name] = text

    def flush(self, stdout=None):
        stdout = stdout or sys.stdout
        args = self.args
        if args.output_dir is None:
            for text in self.files.values():
                stdout.write(text)
            return
        args.output_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (args.output_dir / name).write_text(text)
        config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                  if k not in ("func",)}
        manifest = io.RunManifest.for_inputs(args.command, config, args.seed, self.inputs)
        data = json.loads(manifest.to_json())
        data["outputs"] = sorted(self.files)
        (args.output_dir / "manifest.json").write_text(json.dumps(data, indent=2) + "\n")


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _fmt(args, default="json"):
    return args.format or default


def cmd_dtv(args, out):
    if args.counts:
        hists = [Histogram([int(x) for x in args.counts.split(",")], "counts")]
    else:
        hists = io.read_histograms(args.inputs, _binning(args))
    fn = circular_dtv if args.circular else dtv
    if len(hists) == 1 and args.format is None:
        out.add("dtv.txt", f"{fn(hists[0])}\n")
        return
    records = [{"label": h.label, "N": h.N, "dtv": fn(h)} for h in hists]
    out.add(f"dtv.{_fmt(args, 'csv')}", io.format_records(records, _fmt(args, "csv")))


def cmd_expected(args, out):
    if len(args.n) == 1 and len(args.N) == 1:
        res = expected.expected_dtv(args.n[0], args.N[0], args.method)
        if args.format == "json":
            out.add("expected.json", json.dumps(res.__dict__) + "\n")
        else:
            out.add("expected.txt", f"{res.value:.6g}\n")
        return
    rows = expected.approximation_error_grid(args.n, args.N)
    out.add(f"expected.{_fmt(args, 'csv')}", io.format_records(rows, _fmt(args, "csv")))


def cmd_theoretical(args, out):
    spec = io.parse_spec(args.dist, args.n)
    result = {"kind": spec.kind, "n": spec.n, "theoretical": expected.theoretical_dtv(spec)}
    try:
        params = dict(spec.params)
        n_cf = spec.n
        if spec.kind == "normal":
            params["c"] = spec.binning.hi
        if spec.kind == "binomial":
            n_cf = spec.n - 1
        result["closed_form"] = expected.closed_form_dtv(spec.kind, params, n_cf)
    except (ValidationError, KeyError):
        result["closed_form"] = None
    if args.N is not None:
        result["N"] = args.N
        result["upper_bound"] = expected.nonuniform_upper_bound(spec, args.N)
    out.add(f"theoretical.{_fmt(args)}", io.format_records([result], _fmt(args)))


def _fit(args, hists):
    pts = [(h.N, dtv(h)) for h in hists]
    if args.ransac:
        return model.fit_model_ransac(pts, args.threshold, args.iterations,
                                      args.min_points, RngSeed(_seed(args)))
    return model.fit_model(pts)


def cmd_fit(args, out):
    hists = io.read_histograms(args.inputs, _binning(args))
    m = _fit(args, hists)
    out.add("model.json", json.dumps(m.to_dict(), indent=2) + "\n")


def cmd_score(args, out):
    hists = io.read_histograms(args.inputs, _binning(args))
    if args.mc_table:
        table = io.read_mc_table(args.mc_table)
        reports = model.run_mc_scores(hists, table, args.extrapolate)
    else:
        m = io.read_model(args.model) if args.model else _fit(args, hists)
        reports, m = model.run_tvor(hists, model=m)
        if args.output_dir:
            out.add("model.json", json.dumps(m.to_dict(), indent=2) + "\n")
    fmt = _fmt(args)
    out.add(f"scores.{fmt}", io.format_records(io.score_records(reports), fmt))


def cmd_baseline(args, out):
    hists = io.read_histograms(args.inputs, _binning(args))
    reports = baseline.run_chi2_baseline(hists, args.epsilon)
    fmt = _fmt(args)
    out.add(f"scores.{fmt}", io.format_records(io.score_records(reports), fmt))


def cmd_indices(args, out):
    lists = io.read_value_lists(args.inputs)
    rng = tuple(args.range) if args.range else None
    rows = []
    for label, values in lists.items():
        rows.append({"label": label,
                     "whipple": io.sig6(baseline.whipple_index(values, rng)),
                     "myers": io.sig6(baseline.myers_index(values, rng, args.decades))})
    fmt = _fmt(args, "csv")
    out.add(f"indices.{fmt}", io.format_records(rows, fmt))


def _load_pool(path: Path) -> Histogram:
    if io._is_histogram_csv(path):
        return io.read_histogram_csv(path)
    values = io.read_values(path)
    if values.size == 0 or values.dtype.kind == "f":
        raise ValidationError(f"{path}: pool needs integer values")
    return Binning(int(values.min()), int(values.max()), per_value=True).histogram(values, path.stem)


def cmd_mc_table(args, out):
    source = _load_pool(args.pool) if args.pool else io.parse_spec(args.dist, args.n)
    table = model.build_mc_table(source, args.sizes, args.trials, RngSeed(_seed(args)))
    out.add("mc_table.csv", io.format_mc_table(table))
    if args.fit_stderr:
        s = model.fit_stderr_model(table)
        print(f"std ~ {s:.6g} * sqrt(N)", file=sys.stderr)


def cmd_simulate(args, out):
    _, points = io.read_experiment_config(args.config)
    rows = []
    for point in points:
        cfg = io.experiment_from_point(point, args.trials, args.seed,
                                       args.threads)
        kind = args.kind
        if kind == "auto":
            kind = "heaping" if cfg.heaping_fraction > 0 or cfg.outlier is None else "distribution"
        run = (experiments.run_heaping_experiment if kind == "heaping"
               else experiments.run_distribution_experiment)
        res = run(cfg)
        for method in cfg.methods:
            rows.append({
                "experiment": kind, "n": cfg.inlier.n,
                "inlier": point.get("inlier"), "outlier": point.get("outlier", ""),
                "c": point.get("c", ""), "outlier_count": cfg.outlier_count,
                "heaping_fraction": cfg.heaping_fraction, "method": method,
                "mean_rank": io.sig6(res.mean_rank[method]),
                "stderr": io.sig6(res.stderr(method)),
                "ideal": res.ideal, "null": res.null, "trials": res.trials,
            })
    fmt = _fmt(args, "csv")
    out.add(f"mean_ranks.{fmt}", io.format_records(rows, fmt))


def cmd_census(args, out):
    lists = io.read_value_lists(args.inputs)
    reference = io.read_values(args.reference) if args.reference else None
    res = experiments.run_census_pipeline(lists, reference, ransac=args.ransac,
                                          mc_trials=args.mc_trials, seed=_seed(args))
    fmt = _fmt(args)
    ranked = res.ranked("d1")
    out.add(f"scores.{fmt}", io.format_records(io.score_records(ranked), fmt))
    scatter = [{"label": lab, "N": N, "dtv": v, "predicted": io.sig6(p)}
               for lab, N, v, p in res.plot_rows()]
    if args.output_dir:
        out.add("scatter.csv", io.format_records(scatter, "csv"))
        dist = [{"lo": a, "hi": b, "count": c} for a, b, c in res.score_table()]
        out.add("score_distribution.csv", io.format_records(dist, "csv"))
        out.add("model.json", json.dumps(res.model.to_dict(), indent=2) + "\n")
        if res.mc_reports is not None:
            out.add(f"mc_scores.{fmt}",
                    io.format_records(io.score_records(res.ranked("d2")), fmt))
            out.add("mc_table.csv", io.format_mc_table(res.mc_table))
    for r in ranked[: args.top]:
        log.info("%3d  %-30s d'=%.4g  N=%d", r.rank, r.label, r.score, r.N)


def cmd_partition(args, out):
    lists = io.read_value_lists(args.inputs)
    groups = [line.strip() for line in args.groups.read_text().splitlines() if line.strip()]
    all_reports, group_reports = experiments.run_partition_analysis(
        lists, args.target, groups, ransac=args.ransac, seed=_seed(args))
    fmt = _fmt(args)
    out.add(f"groups.{fmt}", io.format_records(io.score_records(group_reports), fmt))
    if args.output_dir:
        ranked = sorted(all_reports, key=lambda r: r.rank)
        out.add(f"scores.{fmt}", io.format_records(io.score_records(ranked), fmt))


def cmd_oracle(args, out):
    probs = [float(x) for x in args.probs.split(",")] if args.probs else None
    value = expected.f_oracle(args.n, args.N, probs, args.limit)
    out.add("oracle.txt", f"{value!r}\n")


COMMANDS = {
    "dtv": cmd_dtv, "expected": cmd_expected, "theoretical": cmd_theoretical,
    "fit": cmd_fit, "score": cmd_score, "baseline": cmd_baseline,
    "indices": cmd_indices, "mc-table": cmd_mc_table, "simulate": cmd_simulate,
    "census": cmd_census, "partition": cmd_partition, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    inputs = getattr(args, "inputs", None) or ()
    out = Output(args, inputs)
    try:
        COMMANDS[args.command](args, out)
        out.flush()
    except TvorError as exc:
        print(f"tvor {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tvor {args.command}: error: {exc}", file=sys.stderr)
        return ValidationError.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""File formats: histogram CSV, raw-value files, models, tables, manifests."""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .errors import ValidationError
from .histogram import Binning, DistributionSpec, Histogram
from .model import DtvModel, McTable

log = logging.getLogger(__name__)

HEADER = "bin,count"


def read_histogram_csv(path) -> Histogram:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ValidationError(f"{path}:1: expected header '{HEADER}'")
    counts = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 'bin,count', got {line!r}")
        try:
            b, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-integer field in {line!r}") from None
        if b != len(counts):
            raise ValidationError(f"{path}:{lineno}: expected bin {len(counts)}, got {b}")
        if c < 0:
            raise ValidationError(f"{path}:{lineno}: negative count {c}")
        counts.append(c)
    if not counts:
        raise ValidationError(f"{path}: no bins")
    return Histogram(counts, path.stem)


def format_histogram_csv(h: Histogram) -> str:
    return HEADER + "\n" + "".join(f"{i},{c}\n" for i, c in enumerate(h.counts.tolist()))


def write_histogram_csv(h: Histogram, path) -> None:
    Path(path).write_text(format_histogram_csv(h))


def read_values(path) -> np.ndarray:
    """One number per line; blank lines ignored.  Integral values come back as ints."""
    path = Path(path)
    values = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            x = float(s)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: not a number: {s!r}") from None
        if not math.isfinite(x):
            raise ValidationError(f"{path}:{lineno}: non-finite value")
        values.append(x)
    arr = np.asarray(values, dtype=float)
    if arr.size and np.all(arr == np.round(arr)):
        return arr.astype(np.int64)
    return arr


def _is_histogram_csv(path: Path) -> bool:
    with path.open() as fh:
        for line in fh:
            if line.strip():
                return line.strip() == HEADER
    return False


def expand_inputs(paths: Iterable) -> list[Path]:
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.is_file() and not q.name.startswith(".")))
        elif p.is_file():
            out.append(p)
        else:
            raise ValidationError(f"{p}: no such file or directory")
    if not out:
        raise ValidationError("no inputs")
    return out


def read_value_lists(paths: Iterable) -> dict[str, np.ndarray]:
    lists = {}
    for p in expand_inputs(paths):
        if p.stem in lists:
            raise ValidationError(f"duplicate list label {p.stem!r}")
        lists[p.stem] = read_values(p)
    return lists


def read_histograms(paths: Iterable, binning: Binning | None = None) -> list[Histogram]:
    """Load histograms from histogram-CSV files or raw-value files (not mixed).

    Raw values are binned with ``binning``; by default one bin per integer
    over the global range of all files.  Labels are the file stems.
    """
    files = expand_inputs(paths)
    kinds = {p: _is_histogram_csv(p) for p in files}
    if len(set(kinds.values())) > 1:
        csvs = [p.name for p, k in kinds.items() if k]
        raws = [p.name for p, k in kinds.items() if not k]
        raise ValidationError(f"mixed input formats: histogram CSV {csvs} vs raw values {raws}")
    if all(kinds.values()):
        hists = [read_histogram_csv(p) for p in files]
    else:
        values = {p: read_values(p) for p in files}
        empty = [p.name for p, v in values.items() if v.size == 0]
        if empty and binning is None:
            log.warning("empty value files: %s", ", ".join(empty))
        if binning is None:
            non_empty = [v for v in values.values() if v.size]
            if not non_empty:
                raise ValidationError("all value files are empty")
            if any(v.dtype.kind == "f" for v in non_empty):
                raise ValidationError("non-integer raw values need an explicit binning")
            binning = Binning(min(int(v.min()) for v in non_empty),
                              max(int(v.max()) for v in non_empty), per_value=True)
        hists = [binning.histogram(v, p.stem) for p, v in values.items()]
    first = files[0], hists[0].n
    for p, h in zip(files, hists):
        if h.n != first[1]:
            raise ValidationError(
                f"inconsistent bin counts: {first[0]} has {first[1]}, {p} has {h.n}")
    return hists


# ---------------------------------------------------------------------------
# models and tables

def write_model(model: DtvModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def read_model(path) -> DtvModel:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return DtvModel.from_dict(data)


def format_mc_table(table: McTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "mean", "std", "trials"])
    for N, mu, sd, t in table.rows():
        w.writerow([N, repr(mu), repr(sd), t])
    return buf.getvalue()


def read_mc_table(path) -> McTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["N", "mean", "std", "trials"]:
            raise ValidationError(f"{path}:1: expected header 'N,mean,std,trials'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((int(row["N"]), float(row["mean"]), float(row["std"]), int(row["trials"])))
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{lineno}: malformed row") from None
    if not rows:
        raise ValidationError(f"{path}: empty table")
    N, mu, sd, t = map(np.array, zip(*rows))
    return McTable(N, mu, sd, t, source=str(path))


def sig6(x):
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.6g}")


def score_records(reports) -> list[dict]:
    out = []
    for r in reports:
        d = r.to_dict()
        d["predicted"] = sig6(d["predicted"])
        d["score"] = sig6(d["score"])
        out.append(d)
    return out


def format_records(records: Sequence[dict], fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(list(records), indent=2) + "\n"
    if not records:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# manifests

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    @classmethod
    def for_inputs(cls, command, config, seed, paths=()):
        files = expand_inputs(paths) if paths else []
        return cls(command, config, seed, {str(p): file_digest(p) for p in files})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=str) + "\n"


# ---------------------------------------------------------------------------
# distribution strings and experiment configs

def parse_params(items: Iterable[str]) -> dict[str, float]:
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"parameter {item!r} is not key=value")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"parameter {key!r} has non-numeric value {value!r}") from None
    return params


def parse_spec(text: str, n: int | None = None, lo: float | None = None,
               hi: float | None = None) -> DistributionSpec:
    """Parse ``"<kind> key=value ..."``, e.g. ``"normal sigma=0.9"``.

    For continuous kinds ``lo``/``hi``/``n`` (or ``c`` as a parameter, giving
    ``[-c, c]``) define the bins.  ``explicit`` takes ``probs=p1,p2,...``.
    """
    parts = text.split()
    if not parts:
        raise ValidationError("empty distribution")
    kind, rest = parts[0], parts[1:]
    if kind == "explicit":
        probs = None
        for item in rest:
            key, _, value = item.partition("=")
            if key == "probs":
                probs = [float(x) for x in value.split(",") if x]
        if probs is None:
            raise ValidationError("explicit distribution needs probs=p1,p2,...")
        return DistributionSpec.explicit(probs)
    params = parse_params(rest)
    if "c" in params:
        c = params.pop("c")
        lo, hi = -c, c
    if "n" in params:
        n = int(params.pop("n"))
    binning = None
    if kind in ("uniform", "triangular", "normal", "beta"):
        if n is None:
            raise ValidationError(f"{kind} needs a bin count n")
        default = (-5.0, 5.0) if kind == "normal" else (0.0, 1.0)
        binning = Binning(default[0] if lo is None else lo, default[1] if hi is None else hi, n)
    return DistributionSpec(kind, params, binning, n)


SWEEPABLE = ("n", "c", "outlier_count", "inlier_count", "heaping_fraction", "outlier", "inlier")


def read_experiment_config(path) -> tuple[dict, list[dict]]:
    """Flat ``key = value`` file (an optional ``[experiment]`` header is allowed).

    Numeric keys in ``SWEEPABLE`` may list several whitespace-separated values
    and distribution keys several ``;``-separated distributions; the cartesian
    product of all listed values gives the config points.
    """
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None
    section = parser[parser.sections()[0]] if parser.sections() else {}
    raw = {k: v.strip() for k, v in section.items()}
    axes = {}
    for key in SWEEPABLE:
        if key in raw:
            sep = ";" if key in ("inlier", "outlier") else None
            vals = [v.strip() for v in raw[key].split(sep) if v.strip()]
            if len(vals) > 1:
                axes[key] = vals
    keys = list(axes)
    points = []
    for combo in itertools.product(*(axes[k] for k in keys)) if keys else [()]:
        point = dict(raw)
        point.update(zip(keys, combo))
        points.append(point)
    return raw, points


def experiment_from_point(point: dict, trials: int | None = None, seed: int | None = None,
                          threads: int = 1):
    from .experiments import ExperimentConfig

    def get(key, cast, default=None):
        if key not in point:
            if default is None:
                raise ValidationError(f"experiment config is missing {key!r}")
            return default
        try:
            return cast(point[key])
        except ValueError:
            raise ValidationError(f"config key {key!r} has bad value {point[key]!r}") from None

    n = get("n", int)
    c = point.get("c")
    lo = -float(c) if c is not None else get("lo", float, 0.0)
    hi = float(c) if c is not None else get("hi", float, 1.0)
    inlier = parse_spec(get("inlier", str), n, lo, hi)
    outlier = parse_spec(point["outlier"], n, lo, hi) if point.get("outlier") else None
    return ExperimentConfig(
        inlier=inlier,
        outlier=outlier,
        inlier_count=get("inlier_count", int, 100),
        outlier_count=get("outlier_count", int, 1),
        size_range=(get("size_min", int, 500), get("size_max", int, 1000)),
        heaping_fraction=get("heaping_fraction", float, 0.0),
        heaping_period=get("heaping_period", int, 5),
        heaping_pick=get("heaping_pick", str, "item"),
        trials=trials if trials is not None else get("trials", int, 1000),
        seed=seed if seed is not None else get("seed", int, 0),
        methods=tuple(m.strip() for m in get("methods", str, "tvor,chi2").split(",") if m.strip()),
        ransac_threshold=get("ransac_threshold", float, 2.0),
        ransac_iterations=get("ransac_iterations", int, 500),
        threads=threads,
    )

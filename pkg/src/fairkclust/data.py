"""Dataset ingestion: CSV loading, protected-attribute coloring, balanced subsampling.

A dataset spec is a small YAML file::

    name: adults
    path: adult.csv            # relative to the spec file
    delimiter: ","
    features: [age, fnlwgt, education-num, capital-gain, hours-per-week]
    protected:
      - {column: sex, values: [Female, Male]}      # two-value selection, others dropped
      - {column: age, threshold: 50}                # numeric: 0 below, 1 at or above
      - {column: marital, in: [married]}            # membership: 1 if in set, else 0
    subsample_size: 1000
    num_samples: 100
    seed: 0
    normalize: false                                # optional min-max scaling

``synthetic:`` replaces ``path``/``features``/``protected`` with generator
parameters (see ``synthetic_mixture``).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import ColoredDataset
from .errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rule:
    kind: str  # "threshold" | "values" | "in"
    arg: object

    @classmethod
    def from_mapping(cls, m: dict) -> "Rule":
        kinds = [key for key in ("threshold", "values", "in") if key in m]
        if len(kinds) != 1:
            raise DataError(f"protected column {m.get('column')!r} needs exactly one of threshold/values/in")
        kind = kinds[0]
        arg = m[kind]
        if kind == "threshold":
            arg = float(arg)
        elif kind == "values":
            if len(arg) != 2:
                raise DataError("a 'values' rule selects exactly two values")
            arg = tuple(_token(v) for v in arg)
        else:
            arg = frozenset(_token(v) for v in arg)
        return cls(kind, arg)


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: Path | None = None
    features: tuple = ()
    protected: tuple = ()  # (column, Rule) pairs
    subsample_size: int = 1000
    num_samples: int = 100
    seed: int = 0
    normalize: bool = False
    delimiter: str = ","
    na_values: tuple = ("", "?", "NA", "nan")
    synthetic: dict | None = None

    def __post_init__(self):
        if self.synthetic is None:
            if not 1 <= len(self.protected) <= 3:
                raise DataError("a dataset spec needs 1 to 3 protected columns")
            if not self.features:
                raise DataError("a dataset spec needs at least one feature column")
        if self.subsample_size < 1 or self.num_samples < 1:
            raise DataError("subsample_size and num_samples must be positive")

    @property
    def num_colors(self) -> int:
        if self.synthetic is not None:
            return int(self.synthetic.get("colors", 8))
        return 2 ** len(self.protected)


def load_spec(path) -> DatasetSpec:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return spec_from_mapping(raw, base=path.parent)


def spec_from_mapping(raw: dict, base=".") -> DatasetSpec:
    unknown = set(raw) - {"name", "path", "features", "protected", "subsample_size", "num_samples", "seed",
                          "normalize", "delimiter", "na_values", "synthetic"}
    if unknown:
        raise DataError(f"unknown spec keys: {sorted(unknown)}")
    synthetic = raw.get("synthetic")
    path = None
    if synthetic is None:
        if "path" not in raw:
            raise DataError("spec needs a 'path' (or a 'synthetic' section)")
        path = Path(base) / raw["path"]
    protected = tuple((m["column"], Rule.from_mapping(m)) for m in raw.get("protected", []))
    return DatasetSpec(
        name=str(raw.get("name", path.stem if path else "synthetic")),
        path=path,
        features=tuple(raw.get("features", ())),
        protected=protected,
        subsample_size=int(raw.get("subsample_size", 1000)),
        num_samples=int(raw.get("num_samples", 100)),
        seed=int(raw.get("seed", 0)),
        normalize=bool(raw.get("normalize", False)),
        delimiter=str(raw.get("delimiter", ",")),
        na_values=tuple(raw.get("na_values", ("", "?", "NA", "nan"))),
        synthetic=dict(synthetic) if synthetic is not None else None,
    )


def _token(value) -> str:
    """Canonical text for category comparison: numbers compare by value."""
    text = str(value).strip()
    try:
        return repr(float(text))
    except ValueError:
        return text


@dataclass
class Table:
    features: np.ndarray
    protected: dict  # column -> list of raw strings, aligned with features
    source_rows: np.ndarray  # 1-based data line numbers in the CSV
    rejected: list = field(default_factory=list)  # (row, reason)
    duplicates: int = 0

    def __len__(self):
        return len(self.features)


def load_csv(spec: DatasetSpec, strict: bool = False) -> Table:
    """Read the selected columns; reject rows with unusable features; drop duplicates.

    Duplicates are judged on the full selected tuple (features plus protected
    values). With ``strict`` any rejected row raises ``DataError``.
    """
    if spec.path is None:
        raise DataError("spec has no CSV path")
    cols = list(spec.features) + [c for c, _ in spec.protected]
    try:
        fh = open(spec.path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {spec.path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=spec.delimiter)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{spec.path} is empty (no header row)")
        header = [h.strip().strip('"') for h in header]
        missing = [c for c in cols if c not in header]
        if missing:
            raise DataError(f"missing columns in {spec.path}: {missing}")
        pos = {c: header.index(c) for c in cols}
        feats, prot, rows, rejected, seen = [], {c: [] for c, _ in spec.protected}, [], [], set()
        dups = 0
        for lineno, rec in enumerate(reader, start=1):
            if not rec:
                continue
            try:
                values = [rec[pos[c]].strip() for c in cols]
            except IndexError:
                rejected.append((lineno, "short row"))
                continue
            fvals = values[: len(spec.features)]
            bad = [c for c, v in zip(spec.features, fvals) if v in spec.na_values]
            if bad:
                rejected.append((lineno, f"missing feature {bad[0]}"))
                continue
            try:
                nums = [float(v) for v in fvals]
            except ValueError:
                rejected.append((lineno, "non-numeric feature"))
                continue
            if not all(np.isfinite(nums)):
                rejected.append((lineno, "non-finite feature"))
                continue
            key = tuple(values)
            if key in seen:
                dups += 1
                continue
            seen.add(key)
            feats.append(nums)
            for (c, _), v in zip(spec.protected, values[len(spec.features):]):
                prot[c].append(v)
            rows.append(lineno)
    if rejected:
        log.info("%s: rejected %d rows", spec.path, len(rejected))
        if strict:
            raise DataError(f"{len(rejected)} unusable rows in {spec.path}", rows=rejected)
    features = np.array(feats, dtype=float).reshape(len(feats), len(spec.features))
    return Table(features, prot, np.array(rows, dtype=np.int64), rejected, dups)


def dichotomize(values, rule: Rule):
    """Binary labels for one protected column.

    Returns (labels, dropped) where labels is -1 on rows the rule drops (only the
    two-value selection drops rows) and ``dropped`` counts them.
    """
    values = list(values)
    labels = np.full(len(values), -1, dtype=np.int64)
    if rule.kind == "threshold":
        for t, v in enumerate(values):
            try:
                labels[t] = int(float(v) >= rule.arg)
            except ValueError:
                pass
    elif rule.kind == "values":
        first, second = rule.arg
        for t, v in enumerate(values):
            tok = _token(v)
            if tok == first:
                labels[t] = 0
            elif tok == second:
                labels[t] = 1
    else:
        for t, v in enumerate(values):
            labels[t] = int(_token(v) in rule.arg)
    kept = labels[labels >= 0]
    if len(values) and (not np.any(kept == 0) or not np.any(kept == 1)):
        raise DataError(f"dichotomization with {rule.kind}={rule.arg!r} leaves one side empty")
    return labels, int((labels < 0).sum())


def colorize(table: Table, spec: DatasetSpec):
    """Color index per row from the binary protected labels (bit i = attribute i).

    Returns (colors, names) with -1 for dropped rows.
    """
    colors = np.zeros(len(table), dtype=np.int64)
    for bit, (column, rule) in enumerate(spec.protected):
        labels, dropped = dichotomize(table.protected[column], rule)
        if dropped:
            log.info("%s: %d rows outside the selected values dropped", column, dropped)
        colors = np.where((labels < 0) | (colors < 0), -1, colors | (labels << bit))
    names = []
    for code in range(spec.num_colors):
        parts = []
        for bit, (column, rule) in enumerate(spec.protected):
            side = (code >> bit) & 1
            if rule.kind == "threshold":
                parts.append(f"{column}{'>=' if side else '<'}{rule.arg:g}")
            elif rule.kind == "values":
                parts.append(f"{column}={rule.arg[side]}")
            else:
                parts.append(f"{column}{' in ' if side else ' not in '}set")
        names.append("|".join(parts))
    return colors, names


def minmax(features: np.ndarray) -> np.ndarray:
    lo, hi = features.min(axis=0), features.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (features - lo) / span


def balanced_subsample(features, colors, size: int, seed: int, num_colors: int | None = None) -> ColoredDataset:
    """Uniform sample of size / ell rows per color, without replacement."""
    features = np.asarray(features, dtype=float)
    colors = np.asarray(colors, dtype=np.int64)
    ell = int(colors.max()) + 1 if num_colors is None else num_colors
    if size % ell:
        raise DataError(f"subsample size {size} is not divisible by {ell} colors")
    per = size // ell
    rng = np.random.default_rng(seed)
    picks = []
    for c in range(ell):
        pool = np.flatnonzero(colors == c)
        if len(pool) < per:
            raise DataError(f"color {c} has only {len(pool)} rows, {per} needed")
        picks.append(np.sort(rng.choice(pool, size=per, replace=False)))
    rows = np.concatenate(picks)
    return ColoredDataset(points=features[rows], colors=colors[rows])


def synthetic_mixture(colors: int = 8, rows_per_color: int = 400, dim: int = 4, components: int = 10,
                      spread: float = 4.0, box: float = 100.0, concentration: float = 0.3, seed: int = 0):
    """Gaussian mixture where each color has its own Dirichlet weights over shared components.

    Low ``concentration`` makes colors occupy different components, so fairness
    constraints cost something. Returns (features, colors).
    """
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, box, size=(components, dim))
    feats, cols = [], []
    for c in range(colors):
        weights = rng.dirichlet(np.full(components, concentration))
        comp = rng.choice(components, size=rows_per_color, p=weights)
        feats.append(means[comp] + rng.normal(scale=spread, size=(rows_per_color, dim)))
        cols.append(np.full(rows_per_color, c))
    return np.vstack(feats), np.concatenate(cols)


def prepare(spec: DatasetSpec):
    """Load and color the full table for a spec. Returns (features, colors, color_names)."""
    if spec.synthetic is not None:
        params = dict(spec.synthetic)
        feats, colors = synthetic_mixture(**params)
        names = [f"color{c}" for c in range(spec.num_colors)]
    else:
        table = load_csv(spec)
        colors, names = colorize(table, spec)
        keep = colors >= 0
        feats, colors = table.features[keep], colors[keep]
    if spec.normalize and len(feats):
        feats = minmax(feats)
    return feats, colors, names

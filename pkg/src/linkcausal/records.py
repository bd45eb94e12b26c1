"""Data model for the two input files, CSV ingestion, and run configuration.

File A carries outcomes plus linking fields; File B carries covariates and a
binary treatment plus the same linking fields.  All loaders are pure functions
over immutable inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields as dc_fields

__all__ = [
    "MISSING_TOKEN",
    "DataFileError",
    "ConfigError",
    "LinkFieldSpec",
    "OutcomeRecord",
    "CovariateRecord",
    "Hyperparameters",
    "SplineConfig",
    "RunConfig",
    "LinkSchema",
    "load_file_a",
    "load_file_b",
    "write_file_a",
    "write_file_b",
    "config_from_pairs",
    "load_config",
    "load_link_schema",
]

# Missing-outcome token, case-sensitive.
MISSING_TOKEN = "NA"


class DataFileError(ValueError):
    """Malformed input CSV (bad header, bad cell, wrong domain)."""


class ConfigError(ValueError):
    """Invalid run configuration (unknown key or out-of-range value)."""


@dataclass(frozen=True)
class LinkFieldSpec:
    """One linking field: exact-match nominal or thresholded string similarity."""

    name: str
    kind: str  # "nominal" | "string"
    string_threshold: float | None = None

    def __post_init__(self):
        if self.kind not in ("nominal", "string"):
            raise ValueError(f"field {self.name!r}: kind must be nominal or string")
        if self.kind == "string":
            t = self.string_threshold
            if t is None or not (0.0 < t <= 1.0):
                raise ValueError(
                    f"field {self.name!r}: string_threshold must be in (0, 1]"
                )
        elif self.string_threshold is not None:
            raise ValueError(f"field {self.name!r}: nominal fields take no threshold")


@dataclass(frozen=True)
class OutcomeRecord:
    """Row of File A: outcome (possibly missing) plus linking-field values."""

    row_id: int
    link_fields: tuple[str, ...]
    y: float | None


@dataclass(frozen=True)
class CovariateRecord:
    """Row of File B: covariates and binary treatment plus linking-field values."""

    row_id: int
    link_fields: tuple[str, ...]
    x: tuple[float, ...]
    w: int


@dataclass(frozen=True)
class Hyperparameters:
    """Prior hyperparameters; all must be positive."""

    a: float = 1.0
    b: float = 1.0
    alpha_pi: float = 1.0
    beta_pi: float = 1.0
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    a_sigma1: float = 1.0
    b_sigma1: float = 1.0
    r1: float = 1.0
    r2: float = 1.0
    delta1: float = 1.0
    delta2: float = 1.0

    def __post_init__(self):
        for f in dc_fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"hyperparameter {f.name} must be > 0")


@dataclass(frozen=True)
class SplineConfig:
    """Polynomial degree and knot count for the semi-parametric outcome model."""

    s: int = 2
    m_knots: int = 15

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("spline degree s must be a positive integer")
        if self.m_knots < 1:
            raise ValueError("m_knots must be a positive integer")


@dataclass(frozen=True)
class RunConfig:
    """Everything one MCMC run needs beyond the data itself."""

    outcome_model: str = "parametric"  # "parametric" | "spline"
    mode: str = "joint"  # "joint" | "two_stage" | "known_link"
    iterations: int = 2000
    burn_in: int = 1500
    seed: int = 0
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    spline: SplineConfig = field(default_factory=SplineConfig)

    def __post_init__(self):
        if self.outcome_model not in ("parametric", "spline"):
            raise ValueError("outcome_model must be parametric or spline")
        if self.mode not in ("joint", "two_stage", "known_link"):
            raise ValueError("mode must be joint, two_stage or known_link")
        if self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class LinkSchema:
    """Column bindings for loading a File A / File B pair from CSV."""

    link_fields: tuple[LinkFieldSpec, ...]
    outcome_column: str = "y"
    covariate_columns: tuple[str, ...] = ("x1", "x2")
    treatment_column: str = "w"


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a headered CSV; reject duplicate header names and ragged rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFileError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataFileError(f"{path}: duplicate header names")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFileError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            rows.append(row)
    if not rows:
        raise DataFileError(f"{path}: no data rows")
    return header, rows


def _column_indices(path, header, names):
    idx = {}
    for name in names:
        if name not in header:
            raise DataFileError(f"{path}: missing column {name!r}")
        idx[name] = header.index(name)
    return idx


def _check_unique_field_names(schema):
    names = [f.name for f in schema]
    if len(set(names)) != len(names):
        raise ValueError("linking field names must be unique within a schema")


def load_file_a(path, schema, outcome_column="y") -> list[OutcomeRecord]:
    """Load File A.  The outcome column must parse as a real or be "NA"."""
    _check_unique_field_names(schema)
    header, rows = _read_csv(path)
    idx = _column_indices(path, header, [f.name for f in schema] + [outcome_column])
    records = []
    for i, row in enumerate(rows):
        raw_y = row[idx[outcome_column]]
        if raw_y == MISSING_TOKEN:
            y = None
        else:
            try:
                y = float(raw_y)
            except ValueError:
                raise DataFileError(
                    f"{path}: row {i + 2}: outcome {raw_y!r} is not numeric"
                ) from None
        link_values = tuple(row[idx[f.name]] for f in schema)
        records.append(OutcomeRecord(row_id=i, link_fields=link_values, y=y))
    return records


def load_file_b(
    path, schema, covariate_columns=("x1", "x2"), treatment_column="w"
) -> list[CovariateRecord]:
    """Load File B.  Treatment must be 0/1; covariates must all be numeric."""
    _check_unique_field_names(schema)
    header, rows = _read_csv(path)
    needed = [f.name for f in schema] + list(covariate_columns) + [treatment_column]
    idx = _column_indices(path, header, needed)
    records = []
    for j, row in enumerate(rows):
        raw_w = row[idx[treatment_column]]
        if raw_w not in ("0", "1"):
            raise DataFileError(
                f"{path}: row {j + 2}: treatment {raw_w!r} must be 0 or 1"
            )
        x = []
        for col in covariate_columns:
            raw = row[idx[col]]
            try:
                x.append(float(raw))
            except ValueError:
                raise DataFileError(
                    f"{path}: row {j + 2}: covariate {col}={raw!r} is not numeric"
                ) from None
        link_values = tuple(row[idx[f.name]] for f in schema)
        records.append(
            CovariateRecord(row_id=j, link_fields=link_values, x=tuple(x), w=int(raw_w))
        )
    return records


def _format_float(v: float) -> str:
    # repr round-trips doubles exactly, which keeps load->write->load the identity
    return repr(float(v))


def write_file_a(path, records, schema, outcome_column="y"):
    """Write File A records back to CSV (inverse of load_file_a)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in schema] + [outcome_column])
        for rec in records:
            y = MISSING_TOKEN if rec.y is None else _format_float(rec.y)
            writer.writerow(list(rec.link_fields) + [y])


def write_file_b(path, records, schema, covariate_columns=("x1", "x2"), treatment_column="w"):
    """Write File B records back to CSV (inverse of load_file_b)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f.name for f in schema] + list(covariate_columns) + [treatment_column]
        )
        for rec in records:
            writer.writerow(
                list(rec.link_fields)
                + [_format_float(v) for v in rec.x]
                + [str(rec.w)]
            )


# --- run configuration --------------------------------------------------

_HYPER_KEYS = {f.name for f in dc_fields(Hyperparameters)}
_INT_KEYS = {"iterations", "burn_in", "seed", "spline_s", "spline_m_knots"}
_ENUM_KEYS = {"outcome_model", "mode"}


def _parse_kv_lines(path):
    """Parse the flat `key = value` grammar with `#` comments."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected `key = value`")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ConfigError(f"{path}: line {lineno}: expected `key = value`")
            if key in pairs:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            pairs[key] = value
    return pairs


def config_from_pairs(pairs: dict[str, str], source: str = "<config>") -> RunConfig:
    """Build a RunConfig from raw key/value strings; absent keys take defaults."""
    kwargs = {}
    hyper_kwargs = {}
    spline_kwargs = {}
    for key, value in pairs.items():
        try:
            if key in _HYPER_KEYS:
                hyper_kwargs[key] = float(value)
            elif key in _INT_KEYS:
                parsed = int(value)
                if key == "spline_s":
                    spline_kwargs["s"] = parsed
                elif key == "spline_m_knots":
                    spline_kwargs["m_knots"] = parsed
                else:
                    kwargs[key] = parsed
            elif key in _ENUM_KEYS:
                kwargs[key] = value
            else:
                raise ConfigError(f"{source}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"{source}: key {key!r}: cannot parse {value!r}") from None
    try:
        return RunConfig(
            hyper=Hyperparameters(**hyper_kwargs),
            spline=SplineConfig(**spline_kwargs),
            **kwargs,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    """Load a RunConfig from a flat key=value file; absent keys take defaults."""
    return config_from_pairs(_parse_kv_lines(path), source=str(path))


def _parse_field_spec(token: str) -> LinkFieldSpec:
    parts = [p.strip() for p in token.split(":")]
    if len(parts) == 2 and parts[1] == "nominal":
        return LinkFieldSpec(name=parts[0], kind="nominal")
    if len(parts) == 3 and parts[1] == "string":
        return LinkFieldSpec(
            name=parts[0], kind="string", string_threshold=float(parts[2])
        )
    raise ConfigError(
        f"bad link field {token!r}; use name:nominal or name:string:threshold"
    )


def load_link_schema(path) -> LinkSchema:
    """Load column bindings for cmd_link: link_fields, outcome/covariate/treatment columns."""
    pairs = _parse_kv_lines(path)
    known = {"link_fields", "outcome_column", "covariate_columns", "treatment_column"}
    unknown = set(pairs) - known
    if unknown:
        raise ConfigError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    if "link_fields" not in pairs:
        raise ConfigError(f"{path}: link_fields is required")
    try:
        specs = tuple(
            _parse_field_spec(tok) for tok in pairs["link_fields"].split(",") if tok.strip()
        )
        schema = LinkSchema(
            link_fields=specs,
            outcome_column=pairs.get("outcome_column", "y"),
            covariate_columns=tuple(
                c.strip()
                for c in pairs.get("covariate_columns", "x1,x2").split(",")
                if c.strip()
            ),
            treatment_column=pairs.get("treatment_column", "w"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _check_unique_field_names(schema.link_fields)
    return schema

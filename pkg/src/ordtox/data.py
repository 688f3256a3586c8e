"""Trial ledgers and run configuration on disk.

Ledgers are comma-separated files with the fixed header
``patient_id,cohort,okdose,aedose,grade``; configuration is a flat JSON
object whose omitted keys fall back to the package defaults.  The AFM11
trial ships with the package; ``ORDTOX_DATA_DIR`` points dataset lookups at
a different directory of CSV files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from importlib import resources
from pathlib import Path

from .model import HyperPriors, PatientRecord, TrialDataset
from .sampler import McmcConfig

__all__ = [
    "DATASET_HEADER",
    "available_datasets",
    "bundled_dataset_path",
    "config_from_mapping",
    "config_to_mapping",
    "load_bundled",
    "load_config",
    "load_trial",
    "read_ledger_rows",
    "save_config",
    "save_trial",
    "validate",
]

DATASET_HEADER = ("patient_id", "cohort", "okdose", "aedose", "grade")

_DATA_DIR_ENV = "ORDTOX_DATA_DIR"

_PRIOR_KEYS = ("mu_lo", "mu_hi", "cv_mean", "cv_prec", "r0_lo", "r0_hi", "r_prec")
# config file key -> McmcConfig field
_CHAIN_KEYS = {
    "chains": "chains",
    "adapt": "adapt_iters",
    "burnin": "burnin_iters",
    "retained": "retained_per_chain",
    "thin": "thin",
    "seed": "seed",
}


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text(encoding="utf-8")


def _write_text(dest, text: str) -> None:
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def _parse_rows(text: str) -> list[tuple[str, str, float, float, int]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("line 1: missing header") from None
    if [h.strip() for h in header] != list(DATASET_HEADER):
        raise ValueError(f"line 1: header must be {','.join(DATASET_HEADER)}")
    rows: list[tuple[str, str, float, float, int]] = []
    for record in reader:
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        line = reader.line_num
        if len(record) != len(DATASET_HEADER):
            raise ValueError(
                f"line {line}: expected {len(DATASET_HEADER)} fields, got {len(record)}"
            )
        pid, cohort, ok_text, ae_text, grade_text = (f.strip() for f in record)
        try:
            okdose = float(ok_text)
            aedose = float(ae_text)
        except ValueError:
            raise ValueError(f"line {line}: doses must be decimal numbers") from None
        try:
            grade = int(grade_text)
        except ValueError:
            raise ValueError(f"line {line}: grade must be an integer") from None
        rows.append((pid, cohort, okdose, aedose, grade))
    if not rows:
        raise ValueError("no patients")
    return rows


def read_ledger_rows(source) -> list[tuple[str, str, float, float, int]]:
    """Structurally parse a ledger without checking record invariants."""
    return _parse_rows(_read_text(source))


def validate(rows) -> list[str]:
    """Invariant violations of structurally parsed rows; empty when clean.

    Accepts row tuples ``(patient_id, cohort, okdose, aedose, grade)`` or
    ``PatientRecord`` values.  Violations are data, not exceptions, and their
    multiset does not depend on row order.
    """
    violations: list[str] = []
    seen: set[str] = set()
    for row in rows:
        if isinstance(row, PatientRecord):
            fields = (row.patient_id, row.cohort, row.okdose, row.aedose, row.grade)
        else:
            fields = tuple(row)
        try:
            record = PatientRecord(*fields)
        except (TypeError, ValueError) as err:
            violations.append(str(err))
            continue
        if record.patient_id in seen:
            violations.append(f"duplicate patient_id {record.patient_id!r}")
        seen.add(record.patient_id)
    return violations


def load_trial(source) -> TrialDataset:
    """Parse and validate a ledger from a path or text stream."""
    rows = _parse_rows(_read_text(source))
    violations = validate(rows)
    if violations:
        raise ValueError("; ".join(violations))
    return TrialDataset(tuple(PatientRecord(*row) for row in rows))


def save_trial(data: TrialDataset, dest) -> None:
    """Write a ledger that `load_trial` reads back to an equal dataset."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(DATASET_HEADER)
    for p in data.patients:
        writer.writerow([p.patient_id, p.cohort, repr(p.okdose), repr(p.aedose), p.grade])
    _write_text(dest, out.getvalue())


def _data_dir():
    override = os.environ.get(_DATA_DIR_ENV)
    if override:
        return Path(override)
    return resources.files(__package__) / "datasets"


def available_datasets() -> tuple[str, ...]:
    """Names of the CSV ledgers in the active data directory."""
    root = _data_dir()
    try:
        entries = list(root.iterdir())
    except (FileNotFoundError, NotADirectoryError):
        return ()
    return tuple(sorted(p.name[:-4] for p in entries if p.name.endswith(".csv")))


def bundled_dataset_path(name: str = "afm11") -> Path:
    """Filesystem path of a named dataset; KeyError when absent."""
    if not name or Path(name).name != name:
        raise KeyError(f"unknown dataset {name!r}")
    path = Path(str(_data_dir() / f"{name}.csv"))
    if not path.is_file():
        raise KeyError(f"unknown dataset {name!r}")
    return path


def load_bundled(name: str = "afm11") -> TrialDataset:
    return load_trial(bundled_dataset_path(name))


def _as_float(key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"config key {key!r} must be a number")
    return float(value)


def _as_int(key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"config key {key!r} must be an integer")
    return int(value)


def config_from_mapping(payload: dict) -> tuple[HyperPriors, McmcConfig]:
    """Build (priors, chain protocol) from a flat mapping; strict on keys."""
    priors_kw: dict[str, float] = {}
    chain_kw: dict[str, int] = {}
    for key, value in payload.items():
        if key in _PRIOR_KEYS:
            priors_kw[key] = _as_float(key, value)
        elif key in _CHAIN_KEYS:
            chain_kw[_CHAIN_KEYS[key]] = _as_int(key, value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return HyperPriors(**priors_kw), McmcConfig(**chain_kw)


def config_to_mapping(priors: HyperPriors, config: McmcConfig) -> dict:
    payload = {key: getattr(priors, key) for key in _PRIOR_KEYS}
    payload.update({key: getattr(config, field) for key, field in _CHAIN_KEYS.items()})
    return payload


def load_config(source=None) -> tuple[HyperPriors, McmcConfig]:
    """Read a JSON config; a missing source or blank file means the defaults."""
    if source is None:
        return HyperPriors(), McmcConfig()
    text = _read_text(source)
    if not text.strip():
        return HyperPriors(), McmcConfig()
    payload = json.loads(text)
    if not isinstance(payload, dict):
        raise ValueError("config must be a single object of key-value pairs")
    return config_from_mapping(payload)


def save_config(priors: HyperPriors, config: McmcConfig, dest) -> None:
    """Write a JSON config that `load_config` reads back to equal values."""
    text = json.dumps(config_to_mapping(priors, config), indent=2) + "\n"
    _write_text(dest, text)

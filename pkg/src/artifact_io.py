"""
Artifact I/O - field files, symbol manifests, reports and configs.

Field files (.pfld) are one JSON header line followed by the raw samples:

    {"dims": [...], "domain_dim": n, "dtype": "f64"|"c128", "format": "pfld",
     "layout": "row-major", "value_shape": [...], "version": 1}\\n
    <little-endian float64 real parts>[<little-endian float64 imaginary parts>]

Everything written here is deterministic: JSON keys are sorted, floats are
written by repr, and no timestamps are recorded.
"""

import csv
import hashlib
import json
import math
import os
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import yaml

try:
    from .error_manager import ArtifactError, ConfigurationError
    from .spectral_core import PeriodicField
except ImportError:
    from error_manager import ArtifactError, ConfigurationError
    from spectral_core import PeriodicField


PFLD_FORMAT = "pfld"
PFLD_VERSION = 1
HASH_CHUNK = 1024 * 1024


# ---------------------------------------------------------------------------
# Field files
# ---------------------------------------------------------------------------

def write_pfld(field: PeriodicField, path: str) -> str:
    """Write a field as .pfld; complex fields store real then imaginary planes."""
    values = np.ascontiguousarray(field.values)
    complex_valued = np.iscomplexobj(values)
    header = {
        "format": PFLD_FORMAT,
        "version": PFLD_VERSION,
        "dims": list(field.dims),
        "value_shape": list(field.value_shape),
        "domain_dim": field.domain_dim,
        "dtype": "c128" if complex_valued else "f64",
        "layout": "row-major",
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "wb") as f:
            f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
            f.write(values.real.astype("<f8").tobytes(order="C"))
            if complex_valued:
                f.write(values.imag.astype("<f8").tobytes(order="C"))
    except OSError as e:
        raise ArtifactError(f"cannot write field file {path}: {e}", path=path) from e
    return path


def read_pfld(path: str) -> PeriodicField:
    """Read a .pfld file back into a PeriodicField."""
    try:
        with open(path, "rb") as f:
            header_line = f.readline()
            payload = f.read()
    except OSError as e:
        raise ArtifactError(f"cannot read field file {path}: {e}", path=path) from e
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArtifactError(f"malformed header in {path}: {e}", path=path) from e
    if header.get("format", PFLD_FORMAT) != PFLD_FORMAT or header.get("layout") != "row-major":
        raise ArtifactError(f"{path} is not a row-major pfld file", path=path)
    dtype = header.get("dtype")
    if dtype not in ("f64", "c128"):
        raise ArtifactError(f"unsupported dtype '{dtype}' in {path}", path=path)
    shape = tuple(header.get("dims", [])) + tuple(header.get("value_shape", []))
    count = int(np.prod(shape)) if shape else 0
    planes = 2 if dtype == "c128" else 1
    if count == 0 or len(payload) != planes * count * 8:
        raise ArtifactError(
            f"{path}: payload has {len(payload)} bytes, expected {planes * count * 8}", path=path
        )
    data = np.frombuffer(payload, dtype="<f8").astype(float)
    values = data[:count].reshape(shape)
    if planes == 2:
        values = values + 1j * data[count:].reshape(shape)
    try:
        return PeriodicField(values, int(header.get("domain_dim", len(header["dims"]))))
    except ConfigurationError as e:
        raise ArtifactError(f"{path}: {e}", path=path) from e


# ---------------------------------------------------------------------------
# JSON, CSV, YAML and hashes
# ---------------------------------------------------------------------------

def to_plain(value: Any) -> Any:
    """JSON-ready copy: arrays to lists, complex to [re, im], non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [to_plain(float(value.real)), to_plain(float(value.imag))]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    return value


def write_json(data: Any, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_plain(data), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise ArtifactError(f"cannot write report {path}: {e}", path=path) from e
    return path


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ArtifactError(f"report not found: {path}", path=path) from e
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"cannot read report {path}: {e}", path=path) from e


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as e:
        raise ArtifactError(f"cannot write table {path}: {e}", path=path) from e
    return path


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(HASH_CHUNK), b""):
                h.update(chunk)
    except OSError as e:
        raise ArtifactError(f"cannot hash {path}: {e}", path=path) from e
    return h.hexdigest()


def canonical_hash(data: Any) -> str:
    """sha256 of the sorted-key JSON rendering of data."""
    text = json.dumps(to_plain(data), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_yaml(path: str) -> Any:
    """Parse a YAML file, mapping every failure to ArtifactError."""
    if not os.path.exists(path):
        raise ArtifactError(f"file not found: {path}", path=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ArtifactError(f"error parsing YAML file {path}: {e}", path=path) from e
    except OSError as e:
        raise ArtifactError(f"error reading YAML file {path}: {e}", path=path) from e
    if data is None:
        raise ArtifactError(f"YAML file is empty: {path}", path=path)
    return data


# ---------------------------------------------------------------------------
# Symbols and bundle sections
# ---------------------------------------------------------------------------

def save_symbol(symbol, directory: str, name: str) -> str:
    """
    Write a SymbolGrid as <name>.symbol.yaml plus one .pfld per coefficient
    (and per multiplier when the term has no expression to rebuild it from).
    """
    os.makedirs(directory, exist_ok=True)
    terms = []
    for i, term in enumerate(symbol.terms):
        coeff_file = f"{name}.coef{i}.pfld"
        write_pfld(term.coefficient, os.path.join(directory, coeff_file))
        entry = {"coefficient": coeff_file, "expression": term.expression}
        if term.expression is None or not _rebuildable(term.expression, term.multiplier, symbol.N, symbol.domain_dim):
            mult_file = f"{name}.mult{i}.pfld"
            write_pfld(PeriodicField(term.multiplier, symbol.domain_dim), os.path.join(directory, mult_file))
            entry["multiplier"] = mult_file
        terms.append(entry)
    manifest = {
        "N": symbol.N,
        "domain_dim": symbol.domain_dim,
        "m_order": float(symbol.m_order),
        "regularity_tag": None if math.isinf(symbol.regularity_tag) else float(symbol.regularity_tag),
        "terms": terms,
    }
    path = os.path.join(directory, f"{name}.symbol.yaml")
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    return path


def _rebuildable(expression: str, multiplier: np.ndarray, N: int, domain_dim: int) -> bool:
    """True when the expression reproduces the stored multiplier."""
    try:
        from .parax import multiplier_from_expression
    except ImportError:
        from parax import multiplier_from_expression
    try:
        rebuilt = multiplier_from_expression(expression, N, domain_dim)
    except ConfigurationError:
        return False
    return rebuilt.shape == multiplier.shape and bool(np.allclose(rebuilt, multiplier, rtol=0, atol=1e-14))


def load_symbol(path: str):
    """Inverse of save_symbol."""
    try:
        from .parax import SymbolGrid, SymbolTerm, multiplier_from_expression
    except ImportError:
        from parax import SymbolGrid, SymbolTerm, multiplier_from_expression
    manifest = load_yaml(path)
    directory = os.path.dirname(path)
    missing = {"N", "domain_dim", "m_order", "terms"} - set(manifest)
    if missing:
        raise ArtifactError(f"symbol manifest {path} lacks {sorted(missing)}", path=path)
    N, n = int(manifest["N"]), int(manifest["domain_dim"])
    terms = []
    for entry in manifest["terms"]:
        coefficient = read_pfld(os.path.join(directory, entry["coefficient"]))
        if "multiplier" in entry:
            multiplier = read_pfld(os.path.join(directory, entry["multiplier"])).values
        else:
            multiplier = multiplier_from_expression(entry["expression"], N, n)
        monomial = None
        expr = entry.get("expression") or ""
        if expr.startswith("monomial") and "*" not in expr:
            monomial = tuple(int(float(a)) for a in expr.split()[1].split(","))
        elif expr.strip() == "identity":
            monomial = (0,) * n
        terms.append(SymbolTerm(coefficient, multiplier, entry.get("expression"), monomial))
    tag = manifest.get("regularity_tag")
    return SymbolGrid(terms, float(manifest["m_order"]), math.inf if tag is None else float(tag))


def write_bundle(section, path: str, system_manifest: Optional[dict] = None) -> tuple:
    """Write the slope field as .pfld and its sidecar <path>.json; returns both paths."""
    write_pfld(section.values, path)
    sidecar = dict(section.to_dict())
    sidecar["system_manifest_hash"] = canonical_hash(system_manifest or {})
    side_path = path + ".json"
    write_json(sidecar, side_path)
    return path, side_path

"""Text documents for fields, boundary data and factorizations.

Header keys are plain JSON; numeric payloads are flat arrays in node-major,
row-major, re-then-im order written with 17 significant digits, so a
serialize/deserialize round trip is bit-exact.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ..models.domain import Chart, Circle, DomainSpec
from ..utils.errors import InputError
from .fields import BoundaryData, HermitianField, MatrixField, MetricField, ScalarField
from .gauge_factorization import FactorizationResult
from .grid_domain import Grid

logger = logging.getLogger(__name__)

FIELD_FORMAT = "fhm-field/1"
FACTORIZATION_FORMAT = "fhm-factorization/1"

FIELD_KINDS = {
    "metric": MetricField,
    "hermitian": HermitianField,
    "matrix": MatrixField,
}

AnyField = Union[MatrixField, ScalarField, BoundaryData]


class GridHeader(BaseModel):
    n_rad: int
    n_ang: int
    chart: Chart


class FieldHeader(BaseModel):
    format: str
    domain: DomainSpec
    grid: Optional[GridHeader] = None
    n_ang: Optional[int] = None
    dim: int
    kind: str


def _number(x: float) -> str:
    if not np.isfinite(x):
        raise InputError(f"cannot write non-finite value {x}")
    return format(float(x), ".17g")


def _text(obj: Any) -> str:
    """JSON text with floats at 17 significant digits"""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return "[" + ", ".join(_number(x) for x in obj.ravel()) + "]"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_text(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return json.dumps(obj if not isinstance(obj, np.bool_) else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(obj)
    raise InputError(f"cannot serialize {type(obj).__name__}")


def _interleave(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.complex128)
    return np.stack([values.real, values.imag], axis=-1).ravel()


def _deinterleave(data: List[float], shape: tuple, where: str) -> np.ndarray:
    try:
        flat = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError):
        raise InputError(f"{where}: payload must be a flat array of numbers")
    expected = int(np.prod(shape)) * 2
    if flat.ndim != 1 or flat.size != expected:
        raise InputError(f"{where}: expected {expected} numbers for shape {shape}, got {flat.size}")
    if not np.all(np.isfinite(flat)):
        raise InputError(f"{where}: payload contains non-finite values")
    return np.ascontiguousarray(flat).view(np.complex128).reshape(shape)


def _domain_doc(domain: DomainSpec) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"kind": domain.kind.value, "r_outer": domain.r_outer}
    if domain.r_inner is not None:
        doc["r_inner"] = domain.r_inner
    return doc


def _grid_doc(grid: Grid) -> Dict[str, Any]:
    return {"n_rad": grid.n_rad, "n_ang": grid.n_ang, "chart": grid.chart.value}


def _field_kind(field: AnyField) -> str:
    if isinstance(field, BoundaryData):
        return "boundary"
    if isinstance(field, ScalarField):
        return "scalar"
    if isinstance(field, MetricField):
        return "metric"
    if isinstance(field, HermitianField):
        return "hermitian"
    return "matrix"


def serialize_field(field: AnyField) -> Dict[str, Any]:
    kind = _field_kind(field)
    if kind == "boundary":
        return {
            "format": FIELD_FORMAT,
            "domain": _domain_doc(field.domain),
            "n_ang": field.n_ang,
            "dim": field.dim,
            "kind": kind,
            "circles": {circle.value: _interleave(field.circles[circle]) for circle in field.domain.circles},
        }
    values = field.values[:, None, None] if kind == "scalar" else field.values
    return {
        "format": FIELD_FORMAT,
        "domain": _domain_doc(field.grid.domain),
        "grid": _grid_doc(field.grid),
        "dim": values.shape[-1],
        "kind": kind,
        "data": _interleave(values),
    }


def _header(doc: Dict[str, Any], expected_format: str) -> FieldHeader:
    if not isinstance(doc, dict):
        raise InputError("document must be a JSON object")
    if doc.get("format") != expected_format:
        raise InputError(f"unknown format tag {doc.get('format')!r}, expected {expected_format!r}")
    try:
        header = FieldHeader(**{key: doc.get(key) for key in ("format", "domain", "grid", "n_ang", "dim", "kind") if doc.get(key) is not None})
    except ValidationError as e:
        first = e.errors()[0]
        raise InputError(f"invalid header field {'.'.join(str(p) for p in first['loc'])}: {first['msg']}")
    if header.dim < 1:
        raise InputError(f"dim must be >= 1, got {header.dim}")
    return header


def _grid_from(header: FieldHeader) -> Grid:
    if header.grid is None:
        raise InputError("field document lacks a grid header")
    grid = Grid(domain=header.domain, n_rad=header.grid.n_rad, n_ang=header.grid.n_ang)
    if grid.chart != header.grid.chart:
        raise InputError(f"chart {header.grid.chart.value} does not match a {header.domain.kind.value} grid")
    return grid


def deserialize_field(doc: Dict[str, Any]) -> AnyField:
    header = _header(doc, FIELD_FORMAT)
    n = header.dim
    if header.kind == "boundary":
        circles = doc.get("circles")
        if not isinstance(circles, dict):
            raise InputError("boundary document lacks 'circles'")
        expected = {circle.value for circle in header.domain.circles}
        if set(circles) != expected:
            raise InputError(f"boundary circles {sorted(circles)} do not match {sorted(expected)}")
        if header.n_ang is None:
            raise InputError("boundary document lacks 'n_ang'")
        samples = {
            Circle(name): _deinterleave(data, (header.n_ang, n, n), f"circle {name}") for name, data in circles.items()
        }
        return BoundaryData(domain=header.domain, dim=n, circles=samples)

    grid = _grid_from(header)
    if "data" not in doc:
        raise InputError("field document lacks 'data'")
    if header.kind == "scalar":
        if n != 1:
            raise InputError(f"scalar fields have dim 1, got {n}")
        values = _deinterleave(doc["data"], (grid.n_nodes, 1, 1), "data")
        return ScalarField(grid=grid, values=values[:, 0, 0].real)
    if header.kind not in FIELD_KINDS:
        raise InputError(f"unknown field kind {header.kind!r}")
    values = _deinterleave(doc["data"], (grid.n_nodes, n, n), "data")
    return FIELD_KINDS[header.kind](grid=grid, values=values)


def serialize_factorization(fact: FactorizationResult) -> Dict[str, Any]:
    grid = fact.grid
    return {
        "format": FACTORIZATION_FORMAT,
        "domain": _domain_doc(grid.domain),
        "grid": _grid_doc(grid),
        "dim": fact.K.dim,
        "kind": "factorization",
        "base_node": fact.base_node,
        "monodromy_unitarity_defect": fact.monodromy_unitarity_defect,
        "periodicity_defect": fact.periodicity_defect,
        "holomorphy_defect": fact.holomorphy_defect,
        "a": _interleave(fact.a),
        "monodromy": _interleave(fact.monodromy),
        "K": _interleave(fact.K.values),
    }


def deserialize_factorization(doc: Dict[str, Any]) -> FactorizationResult:
    header = _header(doc, FACTORIZATION_FORMAT)
    grid = _grid_from(header)
    n = header.dim
    for key in ("base_node", "monodromy_unitarity_defect", "periodicity_defect", "holomorphy_defect", "a", "monodromy", "K"):
        if key not in doc:
            raise InputError(f"factorization document lacks '{key}'")
    return FactorizationResult(
        K=MatrixField(grid=grid, values=_deinterleave(doc["K"], (grid.n_nodes, n, n), "K")),
        a=_deinterleave(doc["a"], (n, n), "a"),
        base_node=int(doc["base_node"]),
        monodromy=_deinterleave(doc["monodromy"], (n, n), "monodromy"),
        monodromy_unitarity_defect=float(doc["monodromy_unitarity_defect"]),
        periodicity_defect=float(doc["periodicity_defect"]),
        holomorphy_defect=float(doc["holomorphy_defect"]),
    )


def dumps(doc: Dict[str, Any]) -> str:
    return _text(doc) + "\n"


def loads(text: str) -> Dict[str, Any]:
    """Parse a document; integers become floats so -0 and exponents survive unchanged"""
    try:
        doc = json.loads(text, parse_int=float, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise InputError(f"malformed document at line {e.lineno}, column {e.colno}: {e.msg}")
    return doc


def _reject_constant(name: str):
    raise InputError(f"non-finite constant {name} in document")


def write_document(path: Union[str, Path], doc: Dict[str, Any]) -> None:
    Path(path).write_text(dumps(doc))
    logger.debug("Wrote %s document to %s", doc.get("kind"), path)


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}")
    return loads(text)


def read_field(path: Union[str, Path]) -> AnyField:
    return deserialize_field(read_document(path))


def write_field(path: Union[str, Path], field: AnyField) -> None:
    write_document(path, serialize_field(field))


def read_factorization(path: Union[str, Path]) -> FactorizationResult:
    return deserialize_factorization(read_document(path))


def write_factorization(path: Union[str, Path], fact: FactorizationResult) -> None:
    write_document(path, serialize_factorization(fact))


def write_report(path: Union[str, Path], report: BaseModel) -> None:
    Path(path).write_text(report.model_dump_json(indent=2) + "\n")

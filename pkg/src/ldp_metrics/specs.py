"""Parsing of protocol and prior specification strings and protocol JSON files."""

from __future__ import annotations

import json
import os

import numpy as np

from . import catalog
from .errors import LdpMetricsError, ParseError
from .prior import DirichletPrior, jeffreys
from .protocol import Protocol, build_protocol

_FAMILIES = {
    "grr": (("a", "eps"), lambda a, eps: catalog.grr(int(a), eps)),
    "ue": (("a", "kappa", "lambda"), lambda a, kappa, lam: catalog.unary_encoding(int(a), catalog.UeParams(kappa, lam))),
    "oue": (("a", "eps"), lambda a, eps: catalog.oue(int(a), eps)),
    "rappor": (("a", "eps"), lambda a, eps: catalog.rappor_basic(int(a), eps)),
    "blh": (("a", "eps"), lambda a, eps: catalog.blh_matrix(eps, int(a))),
    "lh": (("a", "g", "eps"), lambda a, g, eps: catalog.local_hash(int(a), int(g), eps)),
    "parity": (("a",), lambda a: catalog.parity(int(a))),
    "id": (("a",), lambda a: catalog.identity(int(a))),
}
_INTEGER_KEYS = ("a", "g")


def parse_params(text: str) -> dict:
    """'a=3,eps=1.5' -> {'a': 3.0, 'eps': 1.5}."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ParseError(f"expected key=value, got {item!r}")
        try:
            num = float(val)
        except ValueError:
            raise ParseError(f"value for {key!r} is not a number: {val!r}") from None
        if key in _INTEGER_KEYS and num != int(num):
            raise ParseError(f"{key} must be an integer")
        out[key] = num
    return out


def split_spec(spec: str):
    family, _, rest = spec.strip().partition(":")
    family = family.strip().lower()
    if family not in _FAMILIES:
        raise ParseError(f"unknown protocol family {family!r}; known: {', '.join(_FAMILIES)}")
    return family, parse_params(rest)


def build_family(family: str, params: dict) -> Protocol:
    keys, ctor = _FAMILIES[family]
    missing = [k for k in keys if k not in params]
    extra = [k for k in params if k not in keys]
    if missing or extra:
        raise ParseError(f"{family} takes parameters {', '.join(keys)}; missing {missing}, unexpected {extra}")
    try:
        return ctor(*(params[k] for k in keys))
    except LdpMetricsError:
        raise
    except ValueError as exc:
        raise ParseError(f"invalid parameters for {family}: {exc}") from exc


def load_protocol_json(path: str) -> Protocol:
    """Load ``{"a", "b", "matrix" (rows by output), "labels_in", "labels_out"}``."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read protocol file {path}: {exc}") from exc
    try:
        matrix = np.asarray(data["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"protocol file {path} lacks a numeric 'matrix'") from exc
    if matrix.ndim != 2:
        raise ParseError("'matrix' must be a list of rows")
    if data.get("a", matrix.shape[1]) != matrix.shape[1] or data.get("b", matrix.shape[0]) != matrix.shape[0]:
        raise ParseError("'a'/'b' disagree with the matrix shape")
    return build_protocol(matrix, data.get("labels_in"), data.get("labels_out"))


def protocol_to_json(q: Protocol) -> dict:
    def label(v):
        if isinstance(v, (frozenset, set)):
            return sorted(v)
        if isinstance(v, tuple):
            return [label(u) for u in v]
        return v.item() if isinstance(v, np.generic) else v
    return {"a": q.a, "b": q.b, "matrix": q.matrix.tolist(),
            "labels_in": [label(v) for v in q.labels_in], "labels_out": [label(v) for v in q.labels_out]}


def parse_protocol(spec: str) -> Protocol:
    """Builtin spec such as 'grr:a=4,eps=2' or a path to a protocol JSON file."""
    if spec.endswith(".json") or os.path.isfile(spec):
        return load_protocol_json(spec)
    return build_family(*split_spec(spec))


def parse_prior(spec: str, a: int) -> DirichletPrior:
    """'jeffreys' or 'dirichlet:0.5,0.5,1.0' for an alphabet of size a."""
    spec = spec.strip().lower()
    if spec == "jeffreys":
        return jeffreys(a)
    kind, _, rest = spec.partition(":")
    if kind != "dirichlet" or not rest:
        raise ParseError(f"unknown prior {spec!r}; use 'jeffreys' or 'dirichlet:a1,a2,...'")
    try:
        alpha = [float(v) for v in rest.split(",")]
    except ValueError:
        raise ParseError(f"bad Dirichlet parameters {rest!r}") from None
    if len(alpha) != a:
        raise ParseError(f"prior has {len(alpha)} parameters but the protocol has {a} inputs")
    try:
        return DirichletPrior(alpha)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc

"""JSON model documents and the human-readable network print-out.

Document layout (``"format": "streambayes-bn-1"``)::

    {
      "format": "streambayes-bn-1",
      "variables": [{"name": "A", "kind": "FINITE_SET", "labels": ["0", "1"],
                     "role": "observable"}, ...],
      "parents": {"B": ["A"], ...},
      "cpds": {
        "A": {"kind": "Multinomial", "probabilities": [[0.3, 0.7]]},
        "Z": {"kind": "Normal_Multinomial",
              "configurations": [{"intercept": 0.0, "coeffs": [], "variance": 1.0}, ...]}
      }
    }

Gaussian configurations are listed by discrete-parent configuration index in
row-major label order.  Floats are written with ``repr`` precision, so a
round trip is bit-faithful for finite doubles.
"""

from __future__ import annotations

import json

import numpy as np

from .core import (
    DAG,
    BayesianNetwork,
    CLGaussian,
    Multinomial,
    StateSpace,
    Variable,
    distribution_kind,
    validate_network,
)
from .errors import ParseError, ValidationError

FORMAT = "streambayes-bn-1"
RENORMALIZE_TOL = 1e-9
EXACT_TOL = 1e-12


def network_to_dict(bn: BayesianNetwork) -> dict:
    variables = []
    for v in bn.variables:
        entry = {"name": v.name, "kind": v.space.kind}
        if v.is_discrete:
            entry["labels"] = list(v.space.labels)
        entry["role"] = v.role
        variables.append(entry)
    cpds = {}
    for v in bn.variables:
        cpd = bn.cpds[v.name]
        kind = bn.kind(v.name)
        if isinstance(cpd, Multinomial):
            cpds[v.name] = {"kind": kind, "probabilities": cpd.table.tolist()}
        else:
            configs = [
                {
                    "intercept": float(cpd.intercepts[c]),
                    "coeffs": cpd.coeffs[c].tolist(),
                    "variance": float(cpd.variances[c]),
                }
                for c in range(cpd.n_configs)
            ]
            cpds[v.name] = {"kind": kind, "configurations": configs}
    return {
        "format": FORMAT,
        "variables": variables,
        "parents": {n: list(p) for n, p in bn.dag.parents.items() if p},
        "cpds": cpds,
    }


def serialize_model(bn: BayesianNetwork, extra: dict | None = None) -> bytes:
    doc = network_to_dict(bn)
    if extra:
        doc.update(extra)
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"missing key {key!r} in {where}")
    return obj[key]


def network_from_dict(doc: dict, validate: bool = True) -> BayesianNetwork:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    fmt = _require(doc, "format", "document")
    if fmt != FORMAT:
        raise ParseError(f"unsupported format {fmt!r}")
    variables = []
    for i, entry in enumerate(_require(doc, "variables", "document")):
        where = f"variables[{i}]"
        name = _require(entry, "name", where)
        kind = _require(entry, "kind", where)
        if kind == "FINITE_SET":
            space = StateSpace.finite(_require(entry, "labels", where))
        elif kind == "REAL":
            space = StateSpace.real()
        else:
            raise ParseError(f"unknown variable kind {kind!r} in {where}")
        variables.append(Variable(name, space, entry.get("role", "observable")))
    parents = doc.get("parents", {})
    if not isinstance(parents, dict):
        raise ParseError("'parents' must be an object")
    try:
        dag = DAG(variables, parents)
    except KeyError as exc:
        raise ParseError(f"parents refer to {exc}") from None
    raw_cpds = _require(doc, "cpds", "document")
    cpds = {}
    for v in dag.variables:
        entry = _require(raw_cpds, v.name, "cpds")
        where = f"cpds[{v.name!r}]"
        kind = _require(entry, "kind", where)
        expected = distribution_kind(dag, v.name)
        if kind != expected and validate:
            raise ValidationError(_kind_report(v.name, kind, expected))
        try:
            if kind.startswith("Multinomial"):
                table = np.array(_require(entry, "probabilities", where), dtype=np.float64)
                if table.ndim == 2:
                    sums = table.sum(axis=1, keepdims=True)
                    # rows already normalised up to rounding are kept bit for bit
                    off = np.abs(sums - 1.0)
                    near = (off > EXACT_TOL) & (off <= RENORMALIZE_TOL)
                    table = np.where(near, table / np.where(near, sums, 1.0), table)
                cpds[v.name] = Multinomial(table)
            else:
                configs = _require(entry, "configurations", where)
                cpds[v.name] = CLGaussian(
                    [_require(c, "intercept", where) for c in configs],
                    [_require(c, "variance", where) for c in configs],
                    np.array([_require(c, "coeffs", where) for c in configs], dtype=np.float64).reshape(
                        len(configs), -1
                    ),
                )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad parameters in {where}: {exc}") from None
    bn = BayesianNetwork(dag, cpds)
    if validate:
        report = validate_network(bn)
        if not report.ok:
            raise ValidationError(report)
    return bn


def _kind_report(name, got, expected):
    from .core import ValidationReport

    return ValidationReport(False, name, "distribution kind", f"document says {got}, structure implies {expected}")


def parse_document(data) -> dict:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed model document: {exc.msg} (column {exc.colno})", exc.lineno) from None


def deserialize_model(data) -> BayesianNetwork:
    return network_from_dict(parse_document(data))


def _fmt(x):
    return repr(float(x))


def _config_label(bn, name, cfg):
    dp = bn.dag.discrete_parents(name)
    if not dp:
        return ""
    states = np.unravel_index(cfg, bn.dag.parent_cards(name))
    inner = ", ".join(f"{p} = {int(s)}" for p, s in zip(dp, states))
    return " | {" + inner + "}"


def render_distribution(bn: BayesianNetwork, name: str) -> str:
    """Print-out of one conditional, e.g. ``P(X | H) follows a Normal|Multinomial``."""
    plist = bn.parents(name)
    kind = bn.kind(name).replace("_", "|")
    head = f"P({name} | {', '.join(plist)})" if plist else f"P({name})"
    lines = [f"{head} follows a {kind}"]
    cpd = bn.cpds[name]
    cp = bn.dag.continuous_parents(name)
    for c in range(cpd.n_configs):
        if isinstance(cpd, Multinomial):
            body = "[ " + ", ".join(_fmt(x) for x in cpd.table[c]) + " ]"
        elif cp:
            coeffs = ", ".join(f"{_fmt(b)}*{p}" for b, p in zip(cpd.coeffs[c], cp))
            body = (
                f"Normal [ intercept = {_fmt(cpd.intercepts[c])}, coeffs = [ {coeffs} ], "
                f"var = {_fmt(cpd.variances[c])} ]"
            )
        else:
            body = f"Normal [ mu = {_fmt(cpd.intercepts[c])}, var = {_fmt(cpd.variances[c])} ]"
        lines.append(body + _config_label(bn, name, c))
    return "\n".join(lines)


def render_network(bn: BayesianNetwork) -> str:
    blocks = [render_distribution(bn, v.name) for v in bn.variables]
    return "Bayesian Network:\n" + "\n\n".join(blocks) + "\n"

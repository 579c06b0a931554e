"""Streaming reader/writer for the ARFF dialect used by the toolkit.

Supported header syntax (keywords case-insensitive, ``%`` starts a comment)::

    @relation name
    @attribute DiscreteVar0 {0,1}
    @attribute GaussianVar0 real        % 'numeric' is accepted too
    @data
    1,7.89
    ?,0.5                                % '?' marks a missing cell

Values are held as floats: finite-state cells store the 0-based state index
and missing cells are NaN.  Instances are produced lazily, one line at a
time, so memory stays proportional to the batch size.

Dynamic streams carry two special REAL attributes, ``SEQUENCE_ID`` and
``TIME_ID``.  :func:`open_dynamic_arff` strips them into the
``sequence_id``/``time_id`` fields of :class:`DynamicDataInstance`.
"""

from __future__ import annotations

import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core import REAL, StateSpace
from .errors import AttributeTypeError, OrderError, ParseError, SchemaError

SEQUENCE_ID = "SEQUENCE_ID"
TIME_ID = "TIME_ID"
MISSING = math.nan

NONE, SEQUENCE, TIME = "none", "sequence_id", "time_id"


def is_missing(value) -> bool:
    return value != value


@dataclass(frozen=True)
class Attribute:
    index: int
    name: str
    space: StateSpace
    special: str = NONE

    @property
    def is_discrete(self):
        return self.space.is_finite


class Attributes(tuple):
    """Ordered attribute header with name lookup."""

    def __new__(cls, attrs: Iterable[Attribute], relation: str = "data"):
        self = super().__new__(cls, attrs)
        self.relation = relation
        self._by_name = {a.name: a for a in self}
        return self

    def __getnewargs__(self):
        return (tuple(self), self.relation)

    @classmethod
    def from_spaces(cls, pairs, relation="data"):
        """Build from ``(name, StateSpace)`` pairs."""
        out = []
        for i, (name, space) in enumerate(pairs):
            out.append(Attribute(i, name, space, _special_for(name)))
        return cls(out, relation)

    def get(self, name):
        return self._by_name.get(name)

    def __contains__(self, item):
        if isinstance(item, str):
            return item in self._by_name
        return super().__contains__(item)

    @property
    def names(self):
        return [a.name for a in self]

    def regular(self):
        """Attributes without the special dynamic columns, re-indexed."""
        keep = [a for a in self if a.special == NONE]
        return Attributes([Attribute(i, a.name, a.space) for i, a in enumerate(keep)], self.relation)


def _special_for(name):
    if name == SEQUENCE_ID:
        return SEQUENCE
    if name == TIME_ID:
        return TIME
    return NONE


class DataInstance:
    __slots__ = ("attributes", "values")

    def __init__(self, attributes: Attributes, values):
        self.attributes = attributes
        self.values = tuple(values)

    def __getitem__(self, name):
        return self.values[self.attributes.get(name).index] if isinstance(name, str) else self.values[name]

    def __eq__(self, other):
        return isinstance(other, DataInstance) and _same_values(self.values, other.values)

    def __repr__(self):
        parts = ", ".join(f"{a.name} = {v!r}" for a, v in zip(self.attributes, self.values))
        return "{" + parts + ", }"


class DynamicDataInstance(DataInstance):
    __slots__ = ("sequence_id", "time_id")

    def __init__(self, attributes, values, sequence_id: int, time_id: int):
        super().__init__(attributes, values)
        self.sequence_id = sequence_id
        self.time_id = time_id

    def __eq__(self, other):
        return (
            isinstance(other, DynamicDataInstance)
            and self.sequence_id == other.sequence_id
            and self.time_id == other.time_id
            and _same_values(self.values, other.values)
        )

    def __repr__(self):
        parts = ", ".join(f"{a.name} = {v!r}" for a, v in zip(self.attributes, self.values))
        return f"{{SEQUENCE_ID = {float(self.sequence_id)}, TIME_ID = {float(self.time_id)}, {parts}, }}"


def _same_values(a, b):
    if len(a) != len(b):
        return False
    return all((x == y) or (x != x and y != y) for x, y in zip(a, b))


@dataclass(frozen=True)
class Batch:
    instances: tuple
    batch_index: int

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    @property
    def attributes(self) -> Attributes:
        return self.instances[0].attributes

    @property
    def is_dynamic(self):
        return isinstance(self.instances[0], DynamicDataInstance)

    def to_array(self) -> np.ndarray:
        return np.array([inst.values for inst in self.instances], dtype=np.float64).reshape(
            len(self.instances), len(self.attributes)
        )

    @property
    def sequence_ids(self):
        return np.array([i.sequence_id for i in self.instances], dtype=np.int64)

    @property
    def time_ids(self):
        return np.array([i.time_id for i in self.instances], dtype=np.int64)


class DataStream:
    """Eager header plus a lazy, single-pass instance iterator."""

    def __init__(self, attributes: Attributes, instances: Iterator, closer=None):
        self.attributes = attributes
        self._instances = instances
        self._closer = closer

    def __iter__(self):
        return self._instances

    def __next__(self):
        return next(self._instances)

    def batches(self, batch_size: int):
        return batches(self, batch_size)

    def close(self):
        if self._closer is not None:
            self._closer()
            self._closer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class DynamicDataStream(DataStream):
    pass


def _open_text(source):
    if isinstance(source, (str, Path)):
        if str(source) == "-":
            return sys.stdin, None
        fh = open(source, "r", encoding="utf-8", newline=None)
        return fh, fh.close
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), None
    if isinstance(source, io.TextIOBase):
        return source, None
    if hasattr(source, "read"):
        sample = source.read(0)
        if isinstance(sample, bytes):
            return io.TextIOWrapper(source, encoding="utf-8"), None
        return source, None
    raise TypeError(f"cannot read ARFF from {type(source).__name__}")


def _strip_comment(line):
    if "%" not in line:
        return line.strip()
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "%":
            break
        out.append(ch)
    return "".join(out).strip()


def _split_fields(text, lineno):
    """Comma split honouring single/double quotes."""
    if "'" not in text and '"' not in text:
        return [t.strip() for t in text.split(",")]
    fields, cur, quote, quoted = [], [], None, False
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
            else:
                cur.append(ch)
        elif ch in "'\"":
            quote, quoted = ch, True
        elif ch == ",":
            fields.append("".join(cur) if quoted else "".join(cur).strip())
            cur, quoted = [], False
        else:
            if not (quoted and ch.isspace()):
                cur.append(ch)
    if quote:
        raise ParseError("unterminated quote", lineno)
    fields.append("".join(cur) if quoted else "".join(cur).strip())
    return fields


def _parse_relation(rest, lineno):
    rest = rest.strip()
    if rest[:1] in ("'", '"'):
        end = rest.find(rest[0], 1)
        if end < 0:
            raise ParseError("unterminated quoted relation name", lineno)
        return rest[1:end]
    return rest or "data"


def _parse_name(rest, lineno):
    rest = rest.strip()
    if rest[:1] in ("'", '"'):
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise ParseError("unterminated quoted attribute name", lineno)
        return rest[1:end], rest[end + 1 :].strip()
    parts = rest.split(None, 1)
    if len(parts) < 2:
        raise ParseError("attribute declaration needs a name and a type", lineno)
    return parts[0], parts[1].strip()


def _parse_header(fh):
    relation = None
    pairs = []
    lineno = 0
    for raw in fh:
        lineno += 1
        line = _strip_comment(raw)
        if not line:
            continue
        low = line.lower()
        if low.startswith("@relation"):
            relation = _parse_relation(line[len("@relation") :], lineno)
        elif low.startswith("@attribute"):
            if relation is None:
                raise ParseError("@attribute before @relation", lineno)
            name, typ = _parse_name(line[len("@attribute") :], lineno)
            tl = typ.lower()
            if tl in ("real", "numeric"):
                space = StateSpace.real()
            elif typ.startswith("{") and typ.endswith("}"):
                labels = [x for x in _split_fields(typ[1:-1], lineno)]
                if len(labels) < 2 or len(set(labels)) != len(labels):
                    raise ParseError(f"nominal attribute {name!r} needs >= 2 distinct labels", lineno)
                space = StateSpace.finite(labels)
            else:
                raise ParseError(f"unknown attribute type {typ!r}", lineno)
            if any(n == name for n, _ in pairs):
                raise ParseError(f"duplicate attribute {name!r}", lineno)
            pairs.append((name, space))
        elif low.startswith("@data"):
            if relation is None:
                raise ParseError("missing @relation", lineno)
            if not pairs:
                raise ParseError("no attributes declared", lineno)
            return Attributes.from_spaces(pairs, relation), lineno
        else:
            raise ParseError(f"unexpected header line {line!r}", lineno)
    raise ParseError("missing @data section", lineno)


def _cell_parsers(attributes):
    parsers = []
    for a in attributes:
        if a.space.kind == REAL:
            parsers.append(None)
        else:
            parsers.append({lab: float(i) for i, lab in enumerate(a.space.labels)})
    return parsers


def _numeric_label(cell, parser):
    """State index of a label written in another numeric form (``1.0`` for ``1``)."""
    try:
        x = float(cell)
    except ValueError:
        return None
    hits = [v for lab, v in parser.items() if _as_float(lab) == x]
    return hits[0] if len(hits) == 1 else None


def _as_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def _rows(fh, attributes, lineno):
    parsers = _cell_parsers(attributes)
    width = len(attributes)
    for raw in fh:
        lineno += 1
        line = _strip_comment(raw)
        if not line:
            continue
        if line[0] == "{":
            raise ParseError("sparse ARFF rows are not supported", lineno)
        fields = _split_fields(line, lineno)
        if len(fields) != width:
            raise ParseError(f"expected {width} values, found {len(fields)}", lineno)
        values = []
        for cell, parser, attr in zip(fields, parsers, attributes):
            if cell == "?":
                values.append(MISSING)
            elif parser is None:
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"{cell!r} is not a number ({attr.name})", lineno) from None
            else:
                v = parser.get(cell)
                if v is None:
                    v = _numeric_label(cell, parser)
                if v is None:
                    raise ParseError(f"{cell!r} is not a state of {attr.name!r}", lineno)
                values.append(v)
        yield lineno, values


def open_arff(source) -> DataStream:
    """Parse the header now; instances are read on iteration."""
    fh, closer = _open_text(source)
    attributes, lineno = _parse_header(fh)

    def gen():
        try:
            for _, values in _rows(fh, attributes, lineno):
                yield DataInstance(attributes, values)
        finally:
            if closer:
                closer()

    return DataStream(attributes, gen(), closer)


def _as_int_id(value, name, lineno):
    if value != value:
        raise ParseError(f"{name} cannot be missing", lineno)
    r = round(value)
    if abs(value - r) > 1e-9:
        raise ParseError(f"{name} must be integral, got {value!r}", lineno)
    return int(r)


def open_dynamic_arff(source) -> DynamicDataStream:
    fh, closer = _open_text(source)
    full, lineno = _parse_header(fh)
    seq_attr, time_attr = full.get(SEQUENCE_ID), full.get(TIME_ID)
    if seq_attr is None or time_attr is None:
        if closer:
            closer()
        raise SchemaError("dynamic data needs SEQUENCE_ID and TIME_ID attributes")
    if seq_attr.space.kind != REAL or time_attr.space.kind != REAL:
        raise SchemaError("SEQUENCE_ID and TIME_ID must be REAL attributes")
    attributes = full.regular()
    keep = [a.index for a in full if a.special == NONE]
    si, ti = seq_attr.index, time_attr.index

    def gen():
        last = {}
        try:
            for ln, values in _rows(fh, full, lineno):
                seq = _as_int_id(values[si], SEQUENCE_ID, ln)
                t = _as_int_id(values[ti], TIME_ID, ln)
                prev = last.get(seq)
                if prev is not None and t <= prev:
                    raise OrderError(f"line {ln}: TIME_ID {t} does not increase within sequence {seq}")
                last[seq] = t
                yield DynamicDataInstance(attributes, [values[k] for k in keep], seq, t)
        finally:
            if closer:
                closer()

    return DynamicDataStream(attributes, gen(), closer)


def batches(instances: Iterable, batch_size: int) -> Iterator[Batch]:
    """Group a stream into consecutive batches; the last one may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    buf = []
    index = 0
    for inst in instances:
        buf.append(inst)
        if len(buf) == batch_size:
            yield Batch(tuple(buf), index)
            index += 1
            buf = []
    if buf:
        yield Batch(tuple(buf), index)


def _format_cell(attr, value):
    if value != value:
        return "?"
    if attr.space.kind == REAL:
        v = float(value)
        if not math.isfinite(v):
            raise AttributeTypeError(f"non-finite value for {attr.name!r}")
        return repr(v)
    labels = attr.space.labels
    if isinstance(value, str):
        if value not in labels:
            raise AttributeTypeError(f"{value!r} is not a state of {attr.name!r}")
        return _quote(value)
    fv = float(value)
    if fv != int(fv) or not 0 <= fv < len(labels):
        raise AttributeTypeError(f"state index {value!r} out of range for {attr.name!r}")
    return _quote(labels[int(fv)])


def _quote(text):
    if text == "" or any(c in text for c in " ,{}'\"%?\t"):
        q = '"' if "'" in text else "'"
        if q in text:
            raise AttributeTypeError(f"cannot quote {text!r}: contains both quote characters")
        return q + text + q
    return text


def _header_lines(attributes, relation, dynamic):
    lines = [f"@relation {_quote(relation)}", ""]
    if dynamic:
        lines.append(f"@attribute {SEQUENCE_ID} real")
        lines.append(f"@attribute {TIME_ID} real")
    for a in attributes:
        if a.special != NONE and dynamic:
            continue
        if a.space.kind == REAL:
            lines.append(f"@attribute {_quote(a.name)} real")
        else:
            lines.append(f"@attribute {_quote(a.name)} {{{','.join(_quote(x) for x in a.space.labels)}}}")
    lines += ["", "@data"]
    return lines


def write_arff(attributes: Attributes, instances: Iterable, sink, relation=None, dynamic=None) -> None:
    """Write a header and instances to a path, ``-`` (stdout) or text stream.

    Instances may be :class:`DataInstance` objects or plain value sequences.
    Dynamic instances get ``SEQUENCE_ID``/``TIME_ID`` as leading columns.
    """
    relation = relation or getattr(attributes, "relation", "data")
    it = iter(instances)
    first = next(it, None)
    if dynamic is None:
        dynamic = isinstance(first, DynamicDataInstance)
    close = None
    if isinstance(sink, (str, Path)):
        if str(sink) == "-":
            fh = sys.stdout
        else:
            fh = open(sink, "w", encoding="utf-8", newline="\n")
            close = fh.close
    else:
        fh = sink
    try:
        fh.write("\n".join(_header_lines(attributes, relation, dynamic)) + "\n")
        width = len(attributes)
        pending = [] if first is None else [first]
        for inst in _chain(pending, it):
            values = inst.values if isinstance(inst, DataInstance) else tuple(inst)
            if len(values) != width:
                raise AttributeTypeError(f"instance has {len(values)} values, header has {width}")
            cells = [_format_cell(a, v) for a, v in zip(attributes, values)]
            if dynamic:
                if not isinstance(inst, DynamicDataInstance):
                    raise AttributeTypeError("dynamic output needs DynamicDataInstance rows")
                cells = [repr(float(inst.sequence_id)), repr(float(inst.time_id))] + cells
            fh.write(",".join(cells) + "\n")
    finally:
        if close:
            close()


def _chain(head, tail):
    yield from head
    yield from tail


def arff_text(attributes, instances, relation=None, dynamic=None) -> str:
    buf = io.StringIO()
    write_arff(attributes, instances, buf, relation=relation, dynamic=dynamic)
    return buf.getvalue()

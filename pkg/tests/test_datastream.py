import io
import math
import tracemalloc

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streambayes import batches, open_arff, open_dynamic_arff, write_arff
from streambayes.core import StateSpace
from streambayes.datastream import Attributes, DataInstance, arff_text
from streambayes.errors import AttributeTypeError, OrderError, ParseError, SchemaError

HEADER = """@relation demo
@attribute DiscreteVar0 {0,1}
@attribute GaussianVar0 real
@data
"""

DYNAMIC = """@relation dyn
@attribute SEQUENCE_ID real
@attribute TIME_ID real
@attribute DiscreteVar0 {0,1}
@attribute GaussianVar0 real
@data
0.0,0.0,1.0,7.89
0.0,1.0,0,-1.5
1.0,0.0,?,2.0
"""


def test_header_types():
    s = open_arff((HEADER + "1,0.5\n").encode())
    d, g = s.attributes
    assert d.space.is_finite and d.space.cardinality == 2
    assert g.space == StateSpace.real()


def test_missing_cell():
    rows = list(open_arff((HEADER + "?,?\n").encode()))
    assert all(math.isnan(v) for v in rows[0].values)


@pytest.mark.parametrize(
    "body, line",
    [("1,2,3\n", 5), ("2,0.5\n", 5), ("1,abc\n", 5)],
)
def test_parse_errors_report_line(body, line):
    with pytest.raises(ParseError) as exc:
        list(open_arff((HEADER + body).encode()))
    assert exc.value.line == line


def test_unknown_type():
    with pytest.raises(ParseError):
        open_arff(b"@relation r\n@attribute a date\n@data\n")


def test_dynamic_first_row():
    s = open_dynamic_arff(DYNAMIC.encode())
    first = next(iter(s))
    assert (first.sequence_id, first.time_id) == (0, 0)
    assert first["DiscreteVar0"] == 1.0
    assert [a.name for a in s.attributes] == ["DiscreteVar0", "GaussianVar0"]


def test_dynamic_time_regression():
    bad = DYNAMIC.replace("0.0,1.0,0,-1.5", "0.0,0.0,0,-1.5")
    with pytest.raises(OrderError):
        list(open_dynamic_arff(bad.encode()))


def test_dynamic_without_ids():
    with pytest.raises(SchemaError):
        open_dynamic_arff((HEADER + "1,0.5\n").encode())


def test_batch_sizes():
    attrs = Attributes.from_spaces([("x", StateSpace.real())])
    inst = [DataInstance(attrs, [float(i)]) for i in range(10)]
    assert [len(b) for b in batches(inst, 4)] == [4, 4, 2]
    assert [len(b) for b in batches(inst, 1)] == [1] * 10
    assert list(batches([], 3)) == []


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(), max_size=40), st.integers(1, 12))
def test_batches_concatenate(values, k):
    attrs = Attributes.from_spaces([("x", StateSpace.real())])
    inst = [DataInstance(attrs, [float(v)]) for v in values]
    flat = [i for b in batches(inst, k) for i in b]
    assert flat == inst
    assert [b.batch_index for b in batches(inst, k)] == list(range(len(list(batches(inst, k)))))


def test_write_mixed_round_trip():
    attrs = Attributes.from_spaces([("d", StateSpace.finite(["a", "b c"])), ("x", StateSpace.real())])
    rows = [DataInstance(attrs, v) for v in ([0.0, 0.1], [1.0, float("nan")], [float("nan"), -1e-300])]
    back = list(open_arff(arff_text(attrs, rows).encode()))
    assert back == rows


def test_dynamic_writer_leading_columns():
    s = open_dynamic_arff(DYNAMIC.encode())
    rows = list(s)
    text = arff_text(s.attributes, rows)
    lines = text.splitlines()
    assert lines[2:4] == ["@attribute SEQUENCE_ID real", "@attribute TIME_ID real"]
    assert lines[-3].startswith("0.0,0.0,1,")
    again = list(open_dynamic_arff(text.encode()))
    assert again == rows


def test_nonconforming_instance():
    attrs = Attributes.from_spaces([("d", StateSpace.finite(2))])
    with pytest.raises(TypeError):
        write_arff(attrs, [[5.0]], io.StringIO())
    with pytest.raises(AttributeTypeError):
        write_arff(attrs, [[0.0, 1.0]], io.StringIO())


class _Lines(io.TextIOBase):
    """A generated ARFF source that never holds more than one row."""

    def __init__(self, n):
        self._head = iter(HEADER.splitlines(True))
        self._i, self._n = 0, n

    def readable(self):
        return True

    def readline(self, size=-1):
        for line in self._head:
            return line
        if self._i >= self._n:
            return ""
        self._i += 1
        return f"{self._i % 2},{self._i * 0.5}\n"


def test_iteration_memory_is_bounded():
    n, k = 1_000_000, 500
    tracemalloc.start()
    count = 0
    for b in batches(open_arff(_Lines(n)), k):
        count += len(b)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert count == n
    # a fully materialised stream would need well over 100 MB
    assert peak < 5_000_000, peak

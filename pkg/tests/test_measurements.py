import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from foloc.measurements import (
    FREQUENCY, VOLTAGE_ANGLE, VOLTAGE_MAGNITUDE, Channel, CsvFormatError, MeasurementError,
    MeasurementMatrix, MeasurementType, assemble, demean, dumps_csv, loads_csv, normalize,
    read_csv, write_csv,
)

HEAD = "# fs_hz=60.0,start_s=0.0\nt,bus:1/Vm,bus:2/Va\n"


def _matrix(data, types=None, fs=60.0):
    data = np.asarray(data, dtype=float)
    types = types or [VOLTAGE_MAGNITUDE] * data.shape[0]
    return MeasurementMatrix(tuple(Channel(k + 1, t) for k, t in enumerate(types)), data, fs)


# -- types and channels ------------------------------------------------------

def test_type_equality_uses_code_and_label():
    assert MeasurementType.other("P") == MeasurementType.other("P")
    assert MeasurementType.other("P") != MeasurementType.other("Q")
    assert VOLTAGE_MAGNITUDE != VOLTAGE_ANGLE


@pytest.mark.parametrize("text", ["Vm", "Va", "F", "O:reactive"])
def test_type_string_round_trip(text):
    assert str(MeasurementType.parse(text)) == text


@pytest.mark.parametrize("bad", ["X", "O:", "O:a,b"])
def test_type_rejects_bad_codes(bad):
    with pytest.raises(MeasurementError):
        MeasurementType.parse(bad)


def test_channel_parse():
    assert Channel.parse("bus:12/F") == Channel(12, FREQUENCY)
    with pytest.raises(MeasurementError):
        Channel.parse("12/F")
    with pytest.raises(MeasurementError):
        Channel(0)


# -- assemble ----------------------------------------------------------------

def test_assemble_two_channels():
    Y = assemble([(Channel(1), [1, 2, 3]), (Channel(2), [4, 5, 6])], 60.0)
    assert Y.shape == (2, 3)
    assert Y.times[1] == pytest.approx(1 / 60)
    np.testing.assert_array_equal(Y.row(1), [4, 5, 6])


def test_assemble_zero_series():
    Y = assemble({Channel(1): [0, 0, 0]}, 60.0)
    np.testing.assert_array_equal(Y.data, np.zeros((1, 3)))


def test_assemble_length_mismatch_names_channel():
    with pytest.raises(MeasurementError, match="bus:2/Vm"):
        assemble([(Channel(1), [1, 2, 3]), (Channel(2), [1, 2, 3, 4])], 60.0)


def test_assemble_duplicate_channel():
    with pytest.raises(MeasurementError, match="duplicate"):
        assemble([(Channel(1), [1]), (Channel(1), [2])], 60.0)


def test_matrix_rejects_nonfinite():
    with pytest.raises(MeasurementError, match="non-finite"):
        _matrix([[1.0, np.nan]])


def test_matrix_data_is_read_only():
    Y = _matrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        Y.data[0, 0] = 5.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 20)),
              elements=st.floats(-1e6, 1e6)))
def test_assemble_then_row_reproduces_input(data):
    pairs = [(Channel(k + 1), row) for k, row in enumerate(data)]
    Y = assemble(pairs, 30.0)
    for k, row in enumerate(data):
        np.testing.assert_array_equal(Y.row(Channel(k + 1)), row)


# -- normalize ---------------------------------------------------------------

def test_normalize_single_type():
    Yn = normalize(_matrix([[2, -4], [1, 0]]))
    np.testing.assert_array_equal(Yn.data, [[0.5, -1], [0.25, 0]])
    assert Yn.scale_factors == {VOLTAGE_MAGNITUDE: 4.0}
    assert Yn.norm == "max-abs"


def test_normalize_identity_when_already_unit():
    Y = _matrix([[1, -0.5], [0.2, -1]], [VOLTAGE_MAGNITUDE, FREQUENCY])
    Yn = normalize(Y)
    np.testing.assert_array_equal(Yn.data, Y.data)
    assert Yn.scale_factors == {VOLTAGE_MAGNITUDE: 1.0, FREQUENCY: 1.0}
    assert Yn.warnings == ()


def test_normalize_zero_block_warns():
    Y = _matrix([[3, -6], [0, 0]], [VOLTAGE_MAGNITUDE, VOLTAGE_ANGLE])
    Yn = normalize(Y)
    np.testing.assert_array_equal(Yn.data[1], [0, 0])
    assert Yn.scale_factors[VOLTAGE_ANGLE] == 1.0
    assert len(Yn.warnings) == 1 and "Va" in Yn.warnings[0]


def test_normalize_keeps_interleaved_row_positions():
    types = [VOLTAGE_MAGNITUDE, FREQUENCY, VOLTAGE_MAGNITUDE]
    Yn = normalize(_matrix([[1, 2], [10, 20], [4, -1]], types))
    np.testing.assert_allclose(Yn.data, [[0.25, 0.5], [0.5, 1.0], [1.0, -0.25]])
    assert list(Yn.scale_factors) == [VOLTAGE_MAGNITUDE, FREQUENCY]


mixed = st.integers(1, 6).flatmap(lambda m: st.tuples(
    arrays(float, (m, 8), elements=st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-3)),
    st.lists(st.sampled_from([VOLTAGE_MAGNITUDE, VOLTAGE_ANGLE, FREQUENCY]),
             min_size=m, max_size=m),
))


@settings(max_examples=60, deadline=None)
@given(mixed)
def test_normalize_block_max_is_one_and_idempotent(case):
    data, types = case
    Yn = normalize(_matrix(data, types))
    for mtype in set(types):
        rows = [i for i, t in enumerate(types) if t == mtype]
        assert np.max(np.abs(Yn.data[rows])) == pytest.approx(1.0)
    again = normalize(Yn)
    assert all(v == pytest.approx(1.0) for v in again.scale_factors.values())


@settings(max_examples=40, deadline=None)
@given(mixed, st.randoms(use_true_random=False))
def test_normalize_commutes_with_row_permutation(case, rnd):
    data, types = case
    Y = _matrix(data, types)
    perm = list(range(Y.n_channels))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(normalize(Y.take(perm)).data, normalize(Y).data[perm])


def test_demean():
    Y = demean(_matrix([[1, 2, 3], [5, 5, 5]]))
    np.testing.assert_allclose(Y.data, [[-1, 0, 1], [0, 0, 0]])


# -- CSV ---------------------------------------------------------------------

def test_csv_round_trip(tmp_path, rng):
    chans = (Channel(1), Channel(2, VOLTAGE_ANGLE), Channel(7, MeasurementType.other("P")))
    Y = MeasurementMatrix(chans, rng.standard_normal((3, 100)), 60.0, start_time_s=1.25)
    path = tmp_path / "y.csv"
    write_csv(Y, path)
    back = read_csv(path)
    assert back.channels == Y.channels
    assert back.sample_rate_hz == Y.sample_rate_hz
    assert back.start_time_s == Y.start_time_s
    np.testing.assert_array_equal(back.data, Y.data)


def test_csv_layout():
    text = dumps_csv(_matrix([[1.5, 2.0]], [VOLTAGE_MAGNITUDE], fs=2.0))
    assert text == "# fs_hz=2.0,start_s=0.0\nt,bus:1/Vm\n0.0,1.5\n0.5,2.0\n"


@settings(max_examples=40, deadline=None)
@given(arrays(float, (2, 5), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_is_exact(data):
    Y = _matrix(data)
    np.testing.assert_array_equal(loads_csv(dumps_csv(Y)).data, Y.data)


@pytest.mark.parametrize("text, match, line", [
    (HEAD, "no samples", 3),
    ("# fs_hz=60.0,start_s=0.0\nt,bus:1/Vm,bus:1/Vm\n0,1,2\n", "duplicate channel bus:1/Vm", 2),
    (HEAD + "0,1,2\n0.1,1\n", "ragged row", 4),
    (HEAD + "0,1,2\n0.1,1,abc\n", "non-numeric cell", 4),
    ("fs=60\nt,bus:1/Vm\n0,1\n", "metadata", 1),
    ("# fs_hz=60.0,start_s=0.0\ntime,bus:1/Vm\n0,1\n", "header", 2),
])
def test_csv_errors_carry_position(text, match, line):
    with pytest.raises(CsvFormatError, match=match) as info:
        loads_csv(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_csv_error_column():
    with pytest.raises(CsvFormatError) as info:
        loads_csv(HEAD + "0,1,x\n")
    assert info.value.column == 3

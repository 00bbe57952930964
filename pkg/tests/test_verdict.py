import itertools

from homoclinic.verdict import Verdict

V, R, U = Verdict.VERIFIED, Verdict.REFUTED, Verdict.UNDETERMINED


def test_exit_codes():
    assert (V.exit_code, R.exit_code, U.exit_code) == (0, 1, 2)
    assert V.ok and not R.ok and not U.ok


def test_combine_is_a_conjunction():
    assert Verdict.combine() is V
    for vs in itertools.product([V, R, U], repeat=3):
        got = Verdict.combine(*vs)
        if R in vs:
            assert got is R
        elif U in vs:
            assert got is U
        else:
            assert got is V


def test_values_round_trip():
    for v in Verdict:
        assert Verdict(v.value) is v

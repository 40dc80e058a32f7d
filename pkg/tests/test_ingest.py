from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hazard_bayes.ingest import (CareerRecord, MalformedInningsError, career_summary, parse_innings_file,
                                 parse_score, serialize_innings)
from hazard_bayes.model import InningsRecord

FIXTURE = Path(__file__).parent / "fixtures" / "career_records.csv"

# innings, not-outs, runs, high score, average (2 dp), hundreds, fifties
CAREERS = {
    "C. Cairns": (104, 5, 3320, "158", "33.53", 5, 22),
    "S. Waugh": (260, 46, 10927, "200", "51.06", 32, 50),
    "B. Lara": (232, 6, 11953, "400*", "52.88", 34, 48),
    "B. Young": (68, 4, 2034, "267*", "31.78", 2, 12),
}


@pytest.fixture(scope="module")
def fixture_players():
    return parse_innings_file(FIXTURE.read_text(encoding="utf-8")).players


# ---- score tokens ----

@pytest.mark.parametrize("token,expected", [
    ("45*", InningsRecord(45, True)), ("0", InningsRecord(0, False)),
    ("400*", InningsRecord(400, True)), (" 12 ", InningsRecord(12, False)),
])
def test_parse_score(token, expected):
    assert parse_score(token) == expected


@pytest.mark.parametrize("token", ["", "*", "-3", "4.5", "12**", "abc", "1 2"])
def test_parse_score_rejects(token):
    with pytest.raises(ValueError):
        parse_score(token)


# ---- files ----

def test_parse_file_with_header_comments_and_skips():
    text = ("\ufeffplayer,score\n"
            "# exported 2016\n"
            "A,12\nA,DNB\nA,45*\nB,TDNB\nB,0\nB,absent\nB,sub\n\nA,7\n")
    res = parse_innings_file(text)
    assert res.players == {"A": [InningsRecord(12), InningsRecord(45, True), InningsRecord(7)],
                           "B": [InningsRecord(0)]}
    assert (res.rows_in, res.rows_parsed, res.rows_skipped, res.rows_errored) == (8, 4, 4, 0)


def test_parse_file_without_header():
    res = parse_innings_file("Z,3\nZ,4*\n")
    assert res.players["Z"] == [InningsRecord(3), InningsRecord(4, True)]


def test_malformed_row_reports_line_number():
    text = "player,score\nA,12\nA,1x\nA,5\n"
    with pytest.raises(MalformedInningsError) as err:
        parse_innings_file(text)
    assert [e.line for e in err.value.errors] == [3]
    assert "line 3" in str(err.value)


def test_lenient_mode_keeps_good_rows():
    text = "A,12\nA,oops\n,4\nA,1,2,3,4\nA,9\n"
    res = parse_innings_file(text, strict=False)
    assert res.players["A"] == [InningsRecord(12), InningsRecord(9)]
    assert [e.line for e in res.errors] == [2, 3, 4]
    assert res.rows_in == res.rows_parsed + res.rows_skipped + res.rows_errored


def test_duplicate_innings_index_is_an_error():
    text = "player,score,innings\nA,10,1\nA,20,2\nA,30,2\nB,5,2\n"
    with pytest.raises(MalformedInningsError) as err:
        parse_innings_file(text)
    assert err.value.errors[0].line == 4
    assert "duplicate" in err.value.errors[0].message


def test_lara_high_score_row(fixture_players):
    assert InningsRecord(400, True) in fixture_players["B. Lara"]


# ---- career records ----

@pytest.mark.parametrize("name", sorted(CAREERS))
def test_fixture_career_records(fixture_players, name):
    innings, not_outs, runs, hs, avg, hundreds, fifties = CAREERS[name]
    rec = career_summary(fixture_players[name])
    assert (rec.innings, rec.not_outs, rec.runs) == (innings, not_outs, runs)
    assert str(rec.high_score) == hs
    assert rec.average_2dp == avg
    assert (rec.hundreds, rec.fifties) == (hundreds, fifties)


def test_table_averages_from_counts_alone():
    assert CareerRecord(104, 5, 3320, InningsRecord(158), 5, 22).average_2dp == "33.53"
    assert CareerRecord(260, 46, 10927, InningsRecord(200), 32, 50).average_2dp == "51.06"
    assert CareerRecord(260, 46, 10927, InningsRecord(200), 32, 50).average == pytest.approx(51.0607, abs=1e-4)


def test_average_undefined_when_never_dismissed():
    rec = career_summary([InningsRecord(7, True)])
    assert rec.runs == 7 and rec.dismissals == 0
    assert rec.average is None and rec.average_2dp is None


def test_career_record_invariants():
    with pytest.raises(ValueError):
        CareerRecord(3, 4, 10, InningsRecord(5), 0, 0)
    with pytest.raises(ValueError):
        career_summary([])


def test_high_score_prefers_not_out_on_tie():
    rec = career_summary([InningsRecord(50), InningsRecord(50, True), InningsRecord(3)])
    assert rec.high_score == InningsRecord(50, True)


# ---- properties ----

records = st.lists(st.builds(InningsRecord, st.integers(0, 500), st.booleans()), min_size=1, max_size=40)
names = st.text(alphabet=st.characters(categories=["L", "N"], include_characters=" .'-"),
                min_size=1, max_size=12).map(str.strip).filter(
    lambda s: bool(s) and not s.startswith("#") and s.lower() not in {"player", "name"})


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(names, records, min_size=1, max_size=4))
def test_serialize_parse_round_trip(players):
    text = serialize_innings(players)
    assert parse_innings_file(text).players == players
    assert parse_innings_file(serialize_innings(players, header=False)).players == players


@settings(max_examples=100, deadline=None)
@given(records, records)
def test_career_summary_is_additive(a, b):
    whole = career_summary(a + b)
    parts = career_summary(a) + career_summary(b)
    assert whole == parts


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.integers(0, 300).map(str), st.integers(0, 300).map(lambda s: f"{s}*"),
                          st.sampled_from(["DNB", "tdnb", "absent", "sub", "-", "x1", "", "1.5"])),
                min_size=1, max_size=50))
def test_no_row_is_silently_dropped(tokens):
    text = "".join(f"P,{t}\n" for t in tokens)
    res = parse_innings_file(text, strict=False)
    assert res.rows_in == len(tokens)
    assert res.rows_in == res.rows_parsed + res.rows_skipped + res.rows_errored

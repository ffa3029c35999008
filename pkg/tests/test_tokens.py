import pytest
from hypothesis import given, strategies as st

from ctxsum.tokens import (
    BpeTokenizer,
    FallbackTokenizer,
    TokenizerError,
    bytes_to_unicode,
    count_tokens,
)

from oracles import ref_bpe_tokens, ref_fallback_count


def test_empty_text_counts_zero():
    assert count_tokens("") == 0


def test_two_words():
    assert count_tokens("hello hello") == 2


def test_identifiers_and_punctuation():
    assert FallbackTokenizer().tokens("void f(){}") == [
        "void",
        "f",
        "(",
        ")",
        "{",
        "}",
    ]


def test_underscore_stays_inside_identifier():
    assert count_tokens("snake_case_name") == 1


@given(st.text(max_size=200))
def test_fallback_matches_reference_counter(text):
    assert count_tokens(text) == ref_fallback_count(text)


def test_fallback_on_fixture_methods(miniproj_index):
    for record in miniproj_index.methods.values():
        assert count_tokens(record.source_text) == ref_fallback_count(
            record.source_text
        )


def test_bytes_to_unicode_bijective():
    mapping = bytes_to_unicode()
    assert len(mapping) == 256
    assert len(set(mapping.values())) == 256


# ---------------------------------------------------------------------------
# BPE


@pytest.fixture(scope="module")
def bpe(bpe_fixture_paths):
    vocab, merges = bpe_fixture_paths
    return BpeTokenizer.from_files(vocab, merges)


def test_bpe_known_merges(bpe):
    assert bpe.tokens(" void") == ["Ġvoid"]
    assert bpe.tokens("void f(){}") == ["void", "Ġ", "f", "()", "{}"]
    assert bpe.count("int x") == 3


def test_bpe_matches_reference_on_fixture_methods(
    bpe, bpe_fixture_paths, miniproj_index
):
    _, merges = bpe_fixture_paths
    for record in miniproj_index.methods.values():
        assert bpe.tokens(record.source_text) == ref_bpe_tokens(
            record.source_text, merges
        ), record.qualified_name


@pytest.mark.parametrize(
    "text",
    [
        "",
        " ",
        "   ",
        "a  b",
        "return new String()",
        "voidvoid",
        "int int int",
        "x\ny",
        "tab\tseparated",
        "unicode café ☃",
        "it's a contraction",
        "trailing space ",
    ],
)
def test_bpe_matches_reference_on_assorted_text(bpe, bpe_fixture_paths, text):
    _, merges = bpe_fixture_paths
    assert bpe.tokens(text) == ref_bpe_tokens(text, merges)


@given(st.text(alphabet=list("vointrdeugS(){}; \n\t'"), max_size=60))
def test_bpe_matches_reference_property(bpe, bpe_fixture_paths, text):
    _, merges = bpe_fixture_paths
    assert bpe.tokens(text) == ref_bpe_tokens(text, merges)


def test_missing_vocab_file_errors(tmp_path, bpe_fixture_paths):
    _, merges = bpe_fixture_paths
    with pytest.raises(TokenizerError, match="vocabulary file not found"):
        BpeTokenizer.from_files(tmp_path / "nope.json", merges)


def test_missing_merges_file_errors(tmp_path, bpe_fixture_paths):
    vocab, _ = bpe_fixture_paths
    with pytest.raises(TokenizerError, match="merges file not found"):
        BpeTokenizer.from_files(vocab, tmp_path / "nope.txt")


def test_malformed_merge_line_errors(tmp_path, bpe_fixture_paths):
    vocab, _ = bpe_fixture_paths
    bad = tmp_path / "merges.txt"
    bad.write_text("a b c\n", encoding="utf-8")
    with pytest.raises(TokenizerError, match="malformed merge line"):
        BpeTokenizer.from_files(vocab, bad)


def test_merge_result_missing_from_vocab_errors(tmp_path):
    vocab = tmp_path / "vocab.json"
    vocab.write_text('{"a": 0, "b": 1}', encoding="utf-8")
    merges = tmp_path / "merges.txt"
    merges.write_text("a b\n", encoding="utf-8")
    with pytest.raises(TokenizerError, match="missing from vocabulary"):
        BpeTokenizer.from_files(vocab, merges)


def test_bpe_deterministic(bpe):
    text = "String s = \"void\";"
    assert bpe.tokens(text) == bpe.tokens(text)

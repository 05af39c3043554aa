import pytest

from src.app_config import BOS_ID, EOS_ID, PAD_ID, RESERVED_TOKENS, UNK_ID
from src.errors import ContractViolation
from src.textdata.vocab import Vocab, detokenize, tokenize


@pytest.mark.parametrize("text,mode,lowercase,expected", [
    ("Tim was  in the play .", "word", True, ["tim", "was", "in", "the", "play", "."]),
    ("Tim Was", "word", False, ["Tim", "Was"]),
    ("ab c", "char", True, ["a", "b", " ", "c"]),
    ("   ", "word", True, []),
])
def test_tokenize(text, mode, lowercase, expected):
    assert tokenize(text, mode, lowercase) == expected


def test_unknown_mode():
    with pytest.raises(ContractViolation):
        tokenize("a", "bpe")


def test_build_reserves_special_ids():
    vocab = Vocab.build(["b a", "c a"])
    assert vocab.tokens[:4] == list(RESERVED_TOKENS)
    assert (PAD_ID, BOS_ID, EOS_ID, UNK_ID) == (0, 1, 2, 3)
    assert vocab.tokens[4:] == ["a", "b", "c"]


def test_oov_maps_to_unk():
    vocab = Vocab.build(["a b"])
    assert vocab.encode(["a", "zzz"]) == [vocab.id_of("a"), UNK_ID]


def test_decode_strips_special_tokens():
    vocab = Vocab.build(["a b"])
    ids = [BOS_ID, vocab.id_of("a"), vocab.id_of("b"), EOS_ID, PAD_ID]
    assert vocab.decode_text(ids) == "a b"
    assert vocab.decode(ids, strip_special=False)[0] == "<bos>"


def test_story_round_trip():
    """Текст истории в словаре кодируется и декодируется без потерь"""
    story = "live show . tim was in his school's play . he was nervous ."
    vocab = Vocab.build([story])
    assert vocab.decode_text(vocab.encode_text(story)) == story
    assert detokenize(tokenize(story)) == story


def test_empty_corpus_vocab():
    with pytest.raises(ContractViolation):
        Vocab.build(["", "   "])


def test_save_and_load_char_vocab(tmp_path):
    """Пробел в символьном словаре переживает сохранение"""
    vocab = Vocab.build(["a b", "c"], mode="char")
    vocab.save(tmp_path / "vocab.txt")
    loaded = Vocab.load(tmp_path / "vocab.txt")
    assert loaded == vocab
    assert " " in loaded.tokens


def test_corrupted_reserved_tokens():
    with pytest.raises(ContractViolation):
        Vocab(tokens=["x", "<bos>", "<eos>", "<unk>"])

import json

import numpy as np
import pytest

from src.app_config import EOS_ID, UNK_ID
from src.errors import DanglingReferenceError, IngestError
from src.textdata.corpus import load_corpus, read_jsonl_records, write_corpus
from src.textdata.features import FeatureTable


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_tokenization_counts(tmp_path):
    """context 'live show .' -> m=3; target из 6 слов -> n=7 вместе с EOS"""
    path = write_corpus([{
        "id": "a", "context": "live show .", "target": "tim was in the play .",
        "feature": [0.0, 1.0],
    }], tmp_path / "train.jsonl")
    examples, vocab = load_corpus(path)
    assert examples[0].m == 3
    assert examples[0].n == 7
    assert examples[0].target_ids[-1] == EOS_ID
    assert examples[0].feature.dtype == np.float32


def test_empty_target(tmp_path):
    path = _write_lines(tmp_path / "c.jsonl", [
        json.dumps({"id": "a", "target": "x", "feature": [1.0]}),
        json.dumps({"id": "b", "target": "  ", "feature": [1.0]}),
    ])
    with pytest.raises(IngestError) as exc_info:
        load_corpus(path)
    assert exc_info.value.line_no == 2


def test_malformed_json_reports_line(tmp_path):
    path = _write_lines(tmp_path / "c.jsonl", [
        json.dumps({"id": "a", "target": "x", "feature": [1.0]}),
        "",
        "{not json",
    ])
    with pytest.raises(IngestError) as exc_info:
        read_jsonl_records(path)
    assert exc_info.value.line_no == 3
    assert "строка 3" in str(exc_info.value)


def test_dangling_feature_id(tmp_path):
    table = FeatureTable(dim=2)
    table.add("known", [1.0, 0.0])
    path = write_corpus([
        {"id": "a", "target": "x", "feature_id": "known"},
        {"id": "b", "target": "y", "feature_id": "missing"},
    ], tmp_path / "c.jsonl")
    with pytest.raises(DanglingReferenceError) as exc_info:
        load_corpus(path, features=table)
    assert exc_info.value.feature_id == "missing"


def test_feature_dim_mismatch(tmp_path):
    path = write_corpus([
        {"id": "a", "target": "x", "feature": [1.0, 0.0]},
        {"id": "b", "target": "y", "feature": [1.0]},
    ], tmp_path / "c.jsonl")
    with pytest.raises(IngestError):
        load_corpus(path)


@pytest.mark.parametrize("literal", ["NaN", "Infinity", "-Infinity", "1e39"])
def test_non_finite_inline_feature(tmp_path, literal):
    """JSON допускает NaN и Infinity, загрузчик их отвергает с номером строки"""
    path = _write_lines(tmp_path / "c.jsonl", [
        json.dumps({"id": "a", "target": "x", "feature": [1.0, 0.0]}),
        '{"id": "b", "target": "y", "feature": [1.0, ' + literal + "]}",
    ])
    with pytest.raises(IngestError) as exc_info:
        load_corpus(path)
    assert exc_info.value.line_no == 2
    assert "NaN" in str(exc_info.value)

def test_duplicate_ids(tmp_path):
    path = write_corpus([
        {"id": "a", "target": "x", "feature": [1.0]},
        {"id": "a", "target": "y", "feature": [1.0]},
    ], tmp_path / "c.jsonl")
    with pytest.raises(IngestError):
        load_corpus(path)


def test_eval_split_uses_train_vocab(tmp_path, mock_logger):
    """Словарь строится только по обучающему файлу; OOV на валидации -> UNK"""
    train = write_corpus([{"id": "a", "target": "red cat", "feature": [1.0]}],
                         tmp_path / "train.jsonl")
    val = write_corpus([{"id": "b", "target": "blue cat", "feature": [1.0]}],
                       tmp_path / "val.jsonl")
    _, vocab = load_corpus(train, log_callback=mock_logger)
    examples, same_vocab = load_corpus(val, vocab=vocab)
    assert same_vocab is vocab
    assert examples[0].target_ids[0] == UNK_ID
    assert any("train.jsonl" in msg for msg, _ in mock_logger.logs)


def test_generation_input_without_target(tmp_path):
    path = write_corpus([{"id": "a", "context": "hello", "feature_id": "f"}],
                        tmp_path / "in.jsonl")
    records = read_jsonl_records(path, require_target=False)
    assert records[0].target == ""
    assert records[0].feature_id == "f"


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_jsonl_records(tmp_path / "none.jsonl")

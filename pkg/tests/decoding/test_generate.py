import json

import numpy as np
import pytest

from src.decoding.beam import DecodeConfig, greedy_decode
from src.decoding.generate import (
    GenerationRecord, ModelScorer, decode_example, generate, write_generations
)
from src.errors import ContractViolation, LengthOverflowError
from src.model.vglm import VisuallyGuidedLM
from src.textdata.corpus import RawRecord, read_jsonl_records
from src.textdata.features import read_features


@pytest.fixture
def generation_inputs(synthetic_world, world_corpus):
    _, _, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 4, vocab)
    records = read_jsonl_records(synthetic_world["val"], require_target=False)[:6]
    return model, records, read_features(synthetic_world["features"])


def test_generation_is_deterministic_and_ordered(generation_inputs):
    """Несколько потоков дают тот же результат в порядке входа"""
    model, records, table = generation_inputs
    cfg = DecodeConfig(beam_width=3, max_output_len=6)
    serial = generate(model, records, table, cfg, workers=1)
    parallel = generate(model, records, table, cfg, workers=3)
    assert [r.id for r in serial] == [r.id for r in records]
    assert [r.as_dict() for r in serial] == [r.as_dict() for r in parallel]
    assert all(r.error is None and isinstance(r.text, str) for r in serial)


def test_bad_feature_becomes_error_record(generation_inputs, mock_logger):
    model, records, table = generation_inputs
    broken = RawRecord(line_no=99, id="broken", context="", target="",
                       feature_id="missing", feature=None)
    results = generate(model, [records[0], broken, records[1]], table,
                       DecodeConfig(beam_width=2, max_output_len=4), log_callback=mock_logger)
    assert [r.id for r in results] == [records[0].id, "broken", records[1].id]
    assert results[1].error is not None
    assert results[1].as_dict().keys() == {"id", "error"}
    assert results[0].error is None and results[2].error is None
    assert any(level == "warning" for _, level in mock_logger.logs)


def test_width_one_matches_greedy_on_model(generation_inputs):
    model, records, table = generation_inputs
    feature = table[records[0].feature_id]
    context = model.vocab.encode_text(records[0].context)
    best = decode_example(model, feature, context, DecodeConfig(beam_width=1, max_output_len=5))[0]
    greedy = greedy_decode(ModelScorer(model, feature, context), 5)
    assert best.tokens == greedy.tokens


def test_length_overflow(generation_inputs):
    model, records, table = generation_inputs
    with pytest.raises(LengthOverflowError):
        decode_example(model, table[records[0].feature_id], [],
                       DecodeConfig(beam_width=1, max_output_len=model.cfg.max_positions))


def test_model_without_vocab(generation_inputs):
    model, records, table = generation_inputs
    bare = VisuallyGuidedLM(model.cfg, model.params)
    with pytest.raises(ContractViolation):
        generate(bare, records, table, DecodeConfig())


def test_feature_dim_mismatch(generation_inputs):
    from src.textdata.features import FeatureTable

    model, records, _ = generation_inputs
    table = FeatureTable(dim=3)
    with pytest.raises(ContractViolation):
        generate(model, records, table, DecodeConfig())


def test_scorer_rows_are_distributions(generation_inputs):
    model, records, table = generation_inputs
    scorer = ModelScorer(model, table[records[0].feature_id], [])
    logprobs = scorer([[4], [5]])
    assert logprobs.shape == (2, len(model.vocab))
    assert np.allclose(np.exp(logprobs).sum(axis=1), 1.0, atol=1e-5)


def test_write_generations(tmp_path):
    results = [
        GenerationRecord(id="a", text="red cat", logprob=-1.5, finished=True),
        GenerationRecord(id="b", error="плохой признак"),
    ]
    path = write_generations(results, tmp_path / "out" / "gen.jsonl")
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert lines == [
        {"id": "a", "text": "red cat", "logprob": -1.5, "finished": True},
        {"id": "b", "error": "плохой признак"},
    ]

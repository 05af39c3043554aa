import math

import numpy as np
import pytest

from src.errors import ContractViolation
from src.model.vglm import VisuallyGuidedLM
from src.training.config import TrainConfig
from src.training.evaluation import alignment_gap, evaluate_perplexity, perplexity_from_ce
from src.training.finetune import finetune


def test_perplexity_is_exp_ce(world_corpus, mock_logger):
    _, val, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 1, vocab)
    result = evaluate_perplexity(model, val, log_callback=mock_logger)
    assert result.perplexity == pytest.approx(math.exp(result.cross_entropy))
    assert result.tokens == sum(ex.n for ex in val)
    assert mock_logger.logs


def test_batch_size_does_not_change_ce(world_corpus):
    _, val, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 1, vocab)
    a = evaluate_perplexity(model, val, batch_size=3).cross_entropy
    b = evaluate_perplexity(model, val, batch_size=16).cross_entropy
    assert a == pytest.approx(b, rel=1e-5)


def test_untrained_ce_near_uniform(world_corpus):
    """Малая инициализация: CE близка к ln V"""
    _, val, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 1, vocab)
    ce = evaluate_perplexity(model, val).cross_entropy
    assert abs(ce - math.log(len(vocab))) < 1.0


def test_training_lowers_ce(world_corpus):
    train, val, vocab, cfg = world_corpus
    model = VisuallyGuidedLM.init(cfg, 1, vocab)
    before = evaluate_perplexity(model, val).cross_entropy
    trained = finetune(model, train, TrainConfig(seed=1, epochs=3, batch_size=8, lr=1e-2,
                                                 warmup_steps=0, lambda_=0.0)).model
    assert evaluate_perplexity(trained, val).cross_entropy < before


def test_perplexity_from_ce():
    assert perplexity_from_ce(0.0) == 1.0
    assert perplexity_from_ce(np.log(4.0)) == pytest.approx(4.0)


def test_empty_examples(world_corpus):
    _, _, vocab, cfg = world_corpus
    with pytest.raises(ContractViolation):
        evaluate_perplexity(VisuallyGuidedLM.init(cfg, 1, vocab), [])


def test_alignment_gap_bounds(world_corpus):
    _, val, vocab, cfg = world_corpus
    gap = alignment_gap(VisuallyGuidedLM.init(cfg, 1, vocab), val[:8])
    assert -2.0 <= gap <= 2.0
    with pytest.raises(ContractViolation):
        alignment_gap(VisuallyGuidedLM.init(cfg, 1, vocab), val[:1])

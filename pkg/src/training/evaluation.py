import math
from dataclasses import dataclass

import numpy as np

from src.errors import ContractViolation
from src.model.vglm import VisuallyGuidedLM
from src.numcore.graph import Graph
from src.textdata.batching import make_batches
from src.textdata.corpus import Example


@dataclass(frozen=True)
class PerplexityResult:
    cross_entropy: float
    perplexity: float
    tokens: int


def perplexity_from_ce(ce: float) -> float:
    return math.exp(ce)


def evaluate_perplexity(model: VisuallyGuidedLM, examples: list[Example],
                        batch_size: int = 32, log_callback=None) -> PerplexityResult:
    """
    Средняя по токенам цели кросс-энтропия (teacher forcing) и перплексия.
    Градиенты не считаются.
    """
    if not examples:
        raise ContractViolation("Пустой корпус для оценки")
    total = 0.0
    tokens = 0
    for batch in make_batches(examples, batch_size, seed=None):
        g = Graph()
        out = model.forward(g, batch)
        mask = batch.with_prefix(batch.loss_mask, out.prefix_len)
        targets = batch.with_prefix(batch.next_ids, out.prefix_len)
        loss = g.cross_entropy(out.logits, targets, mask, reduction="sum")
        total += float(loss.value)
        tokens += int(mask.sum())

    ce = total / tokens
    result = PerplexityResult(cross_entropy=ce, perplexity=perplexity_from_ce(ce), tokens=tokens)
    if log_callback:
        log_callback(
            f"Оценка: CE={ce:.4f}, перплексия={result.perplexity:.3f} ({tokens} токенов)",
            "info"
        )
    return result


def alignment_gap(model: VisuallyGuidedLM, examples: list[Example]) -> float:
    """
    Средний cos(v_i, t_i) минус средний cos(v_i, t_j) при j != i
    на одном батче из переданных примеров.
    """
    if len(examples) < 2:
        raise ContractViolation("Для оценки выравнивания нужно минимум два примера")
    batch = make_batches(examples, len(examples), seed=None)[0]
    g = Graph()
    out = model.forward(g, batch)
    reps = model.sentence_rep_node(g, out, batch).value.astype(np.float64)
    feats = batch.features.astype(np.float64)
    feats = feats / np.linalg.norm(feats, axis=1, keepdims=True)
    reps = reps / np.linalg.norm(reps, axis=1, keepdims=True)
    cos = feats @ reps.T
    off_diag = ~np.eye(len(examples), dtype=bool)
    return float(np.diag(cos).mean() - cos[off_diag].mean())

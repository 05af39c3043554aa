"""Градиентная проверка целей обучения на крошечной модели."""
import numpy as np

from src.app_config import (
    EOS_ID, GRADCHECK_EPS, GRADCHECK_MODEL_OVERRIDES, TINY_BATCH_SIZE
)
from src.model.config import ModelConfig
from src.model.vglm import VisuallyGuidedLM
from src.numcore.gradcheck import grad_check_many
from src.numcore.rng import make_rng
from src.objectives.losses import ContrastiveConfig, contrastive_loss, teacher_loss
from src.textdata.batching import Batch, collate
from src.textdata.corpus import Example

FIRST_REGULAR_ID = 4


def tiny_batch(cfg: ModelConfig, seed: int = 0, size: int = TINY_BATCH_SIZE) -> Batch:
    """Случайный батч разной длины: контекст 0..3 токена, цель 2..5 токенов с EOS."""
    rng = make_rng(seed, "gradcheck", 1)
    examples = []
    for i in range(size):
        m = int(rng.integers(0, 4))
        n = int(rng.integers(1, 5))
        context = rng.integers(FIRST_REGULAR_ID, cfg.vocab_size, size=m)
        target = rng.integers(FIRST_REGULAR_ID, cfg.vocab_size, size=n)
        examples.append(Example(
            id=f"tiny-{i}",
            context_ids=tuple(int(t) for t in context),
            target_ids=tuple(int(t) for t in target) + (EOS_ID,),
            feature=rng.normal(0.0, 1.0, size=cfg.d_v).astype(np.float32),
        ))
    return collate(examples)


def combined_objective(model: VisuallyGuidedLM, batch: Batch,
                       configs: dict[str, ContrastiveConfig]):
    """teacher forcing и несколько InfoNCE на одном прямом проходе."""
    def f(g, params):
        out = model.forward(g, batch, params=params)
        mask = batch.with_prefix(batch.loss_mask, out.prefix_len)
        targets = batch.with_prefix(batch.next_ids, out.prefix_len)
        losses = {"teacher": teacher_loss(g, out.logits, targets, mask)}
        reps = model.sentence_rep_node(g, out, batch, params=params)
        for name, cfg in configs.items():
            losses[name] = contrastive_loss(g, batch.features, reps, cfg)
        return losses
    return f


def tiny_model_gradcheck(seed: int = 0, eps: float = GRADCHECK_EPS,
                         max_entries: int | None = None, tau: float = 0.5,
                         log_callback=None) -> dict[str, float]:
    """
    Максимальная относительная ошибка для teacher forcing и InfoNCE
    (оба режима знаменателя) на крошечной модели.
    """
    cfg = ModelConfig.tiny(**GRADCHECK_MODEL_OVERRIDES)
    model = VisuallyGuidedLM.init(cfg, seed)
    batch = tiny_batch(cfg, seed)
    f = combined_objective(model, batch, {
        "contrastive-standard": ContrastiveConfig(tau=tau, denominator_mode="standard"),
        "contrastive-paper": ContrastiveConfig(tau=tau, denominator_mode="paper"),
    })
    if log_callback:
        log_callback("Проверка градиента: teacher, contrastive-standard, contrastive-paper",
                     "info")
    results = grad_check_many(f, model.params, eps=eps, max_entries=max_entries,
                              seed=seed, log_callback=log_callback)
    if log_callback:
        for name, err in results.items():
            log_callback(f"  {name}: макс. отн. ошибка {err:.3e}", "info")
    return results

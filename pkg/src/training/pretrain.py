"""
Предобучение отображающей сети как задачи описания изображения:
только teacher forcing, единственное условие - визуальный префикс.
"""
import dataclasses

from src.errors import ContractViolation
from src.model.vglm import VisuallyGuidedLM
from src.textdata.corpus import Example
from src.training.config import PretrainConfig
from src.training.finetune import TrainingHooks, TrainingResult, run_training
from src.training.run_dir import RunDir


def caption_pairs(examples: list[Example]) -> list[Example]:
    """Пары (признак, текст) с пустым контекстом."""
    return [dataclasses.replace(ex, context_ids=()) for ex in examples]


def pretrain_mapping(model: VisuallyGuidedLM, pairs: list[Example], cfg: PretrainConfig,
                     run_dir: RunDir | None = None,
                     hooks: TrainingHooks | None = None) -> TrainingResult:
    hooks = hooks or TrainingHooks()
    if not model.cfg.has_prefix:
        raise ContractViolation("Префикс отключён (prefix_len=0): нечего предобучать")
    for ex in pairs:
        if ex.feature.shape != (model.cfg.d_v,):
            raise ContractViolation(
                f"[{ex.id}] размерность признака {ex.feature.shape} "
                f"не совпадает с d_v={model.cfg.d_v}"
            )

    hooks.log(
        f"Предобучение отображающей сети: {len(pairs)} пар, {cfg.epochs} эпох, "
        f"батч {cfg.batch_size}, LM {'обучается' if cfg.tune_lm else 'заморожена'}",
        "info"
    )
    if cfg.epochs == 0:
        result = TrainingResult(model=model)
        if run_dir is not None:
            run_dir.start_log()
    else:
        result = run_training(model, caption_pairs(pairs), cfg.as_train_config(), cfg.epochs,
                              run_dir=run_dir, hooks=hooks, ckpt_header={"kind": "mapping"})
    if run_dir is not None:
        path = result.model.save(run_dir.mapping_path,
                                 {"kind": "mapping", "step": str(result.steps)})
        hooks.log(f"Чекпоинт отображающей сети: {path}", "info")
    return result

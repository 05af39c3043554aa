"""
Дообучение с двухфазной целью и флагами заморозки.

Фаза 1 (ep < n_no_contra): только teacher forcing.
Фаза 2: teacher + lambda * InfoNCE.
Параметры групп с выключенным флагом не попадают в оптимизатор
и остаются побитово неизменными.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from src.errors import ContractViolation, NumericFault, StartupError
from src.model.config import ModelConfig
from src.model.vglm import VisuallyGuidedLM
from src.numcore.graph import Graph, backward
from src.numcore.optim import LRSchedule, OptimizerState, clip_grad_norm, lr_at, optimizer_step
from src.numcore.rng import epoch_seed, make_rng
from src.objectives.losses import ContrastiveConfig, LossBreakdown, combined_loss, contrastive_loss, teacher_loss
from src.textdata.batching import Batch, make_batches
from src.textdata.corpus import Example
from src.textdata.vocab import Vocab
from src.training.config import TrainConfig
from src.training.evaluation import evaluate_perplexity
from src.training.run_dir import RunDir


@dataclass
class TrainingResult:
    model: VisuallyGuidedLM
    log: list[dict] = field(default_factory=list)
    epoch_losses: list[dict] = field(default_factory=list)
    best_val_ce: float | None = None
    steps: int = 0
    stopped: bool = False


@dataclass
class TrainingHooks:
    """Обратные вызовы цикла обучения (их подключает TrainingWorker)."""
    log_callback: Callable[[str, str], None] | None = None
    on_step: Callable[[dict], None] | None = None
    on_epoch: Callable[[int, dict], None] | None = None
    should_stop: Callable[[], bool] | None = None

    def log(self, message: str, level: str = "info") -> None:
        if self.log_callback:
            self.log_callback(message, level)


def trainable_names(model: VisuallyGuidedLM, tune_lm: bool, tune_map: bool) -> list[str]:
    names = []
    if tune_lm:
        names += model.lm_names
    if tune_map:
        names += model.map_names
    return names


def batch_loss(model: VisuallyGuidedLM, g: Graph, batch: Batch, ep: int,
               contrastive: ContrastiveConfig, reduction: str = "mean",
               rng: np.random.Generator | None = None) -> LossBreakdown:
    out = model.forward(g, batch, rng=rng)
    mask = batch.with_prefix(batch.loss_mask, out.prefix_len)
    targets = batch.with_prefix(batch.next_ids, out.prefix_len)
    teacher = teacher_loss(g, out.logits, targets, mask, reduction)

    def contrastive_term():
        reps = model.sentence_rep_node(g, out, batch)
        return contrastive_loss(g, batch.features, reps, contrastive)

    return combined_loss(teacher, contrastive_term, ep, contrastive, batch_size=batch.size)


def train_step(model: VisuallyGuidedLM, state: OptimizerState, batch: Batch, ep: int,
               lr: float, names: list[str], cfg: TrainConfig,
               rng: np.random.Generator | None = None
               ) -> tuple[VisuallyGuidedLM, OptimizerState, LossBreakdown]:
    g = Graph()
    breakdown = batch_loss(model, g, batch, ep, cfg.contrastive, cfg.loss_reduction, rng)
    if not names:
        return model, state, breakdown
    try:
        grads = backward(g, breakdown.node)
    except NumericFault as e:
        raise NumericFault(str(e.args[0]), node_id=e.node_id, step=state.step + 1)
    grads, _ = clip_grad_norm(grads, cfg.grad_clip, names)
    params, state = optimizer_step(state, model.params, grads, lr, names)
    return model.with_params(params), state, breakdown


def run_training(model: VisuallyGuidedLM, train_examples: list[Example], cfg: TrainConfig,
                 epochs: int, val_examples: list[Example] | None = None,
                 run_dir: RunDir | None = None, hooks: TrainingHooks | None = None,
                 ckpt_header: dict[str, str] | None = None) -> TrainingResult:
    """Общий цикл для предобучения и дообучения."""
    hooks = hooks or TrainingHooks()
    if not train_examples:
        raise ContractViolation("Пустой обучающий корпус")
    names = trainable_names(model, cfg.tune_lm, cfg.tune_map)
    schedule = LRSchedule(base_lr=cfg.lr, warmup_steps=cfg.warmup_steps)
    state = OptimizerState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    result = TrainingResult(model=model)
    if run_dir is not None:
        run_dir.start_log()

    hooks.log(
        f"Обучаемых тензоров: {len(names)} из {len(model.params)} "
        f"(tune_lm={cfg.tune_lm}, tune_map={cfg.tune_map})",
        "info"
    )
    if not names:
        hooks.log("Все параметры заморожены: веса не изменятся", "warning")

    step = 0
    for ep in range(epochs):
        batches = make_batches(train_examples, cfg.batch_size, seed=epoch_seed(cfg.seed, ep))
        dropout_rng = make_rng(cfg.seed, "dropout", ep) if model.cfg.dropout > 0 else None
        totals = {"teacher": 0.0, "contrastive": 0.0, "total": 0.0}

        for batch in batches:
            if hooks.should_stop and hooks.should_stop():
                result.stopped = True
                hooks.log("Обучение остановлено по запросу", "warning")
                result.model, result.steps = model, step
                return result
            step += 1
            lr = lr_at(schedule, step)
            model, state, breakdown = train_step(
                model, state, batch, ep, lr, names, cfg, dropout_rng
            )
            record = {"step": step, "ep": ep, **breakdown.as_record(), "lr": lr}
            result.log.append(record)
            if run_dir is not None:
                run_dir.append_log(record)
            if hooks.on_step:
                hooks.on_step(record)
            for key in totals:
                totals[key] += record[key]

        summary = {key: value / len(batches) for key, value in totals.items()}
        summary["lambda_effective"] = cfg.contrastive.lambda_at(ep)
        summary["steps"] = step
        if val_examples:
            summary["val_ce"] = evaluate_perplexity(model, val_examples).cross_entropy
            if result.best_val_ce is None or summary["val_ce"] < result.best_val_ce:
                result.best_val_ce = summary["val_ce"]
                if run_dir is not None:
                    model.save(run_dir.best_path, {**(ckpt_header or {}), "epoch": str(ep)})
        if run_dir is not None:
            model.save(run_dir.epoch_path(ep),
                       {**(ckpt_header or {}), "epoch": str(ep), "step": str(step)})
        result.epoch_losses.append(summary)
        if hooks.on_epoch:
            hooks.on_epoch(ep, summary)
        hooks.log(
            f"Эпоха {ep + 1}/{epochs}: teacher={summary['teacher']:.4f}, "
            f"contrastive={summary['contrastive']:.4f}, "
            f"lambda={summary['lambda_effective']}"
            + (f", val_ce={summary['val_ce']:.4f}" if "val_ce" in summary else ""),
            "info"
        )

    result.model, result.steps = model, step
    return result


def finetune(model: VisuallyGuidedLM, train_examples: list[Example], cfg: TrainConfig,
             val_examples: list[Example] | None = None, run_dir: RunDir | None = None,
             hooks: TrainingHooks | None = None) -> TrainingResult:
    """Дообучение на задаче; журнал пишет teacher, contrastive, lambda_effective и lr по шагам."""
    hooks = hooks or TrainingHooks()
    hooks.log(
        f"Дообучение: {cfg.epochs} эпох, батч {cfg.batch_size}, lr={cfg.lr}, "
        f"N_no_contra={cfg.n_no_contra}, lambda={cfg.lambda_}, "
        f"знаменатель={cfg.denominator_mode}",
        "info"
    )
    if cfg.n_no_contra >= cfg.epochs:
        hooks.log("Контрастивная цель не включится ни в одной эпохе", "debug")
    return run_training(model, train_examples, cfg, cfg.epochs, val_examples,
                        run_dir, hooks, ckpt_header={"kind": "model"})


def _copy_group(target: VisuallyGuidedLM, source: VisuallyGuidedLM,
                names: list[str], what: str) -> None:
    for name in names:
        if name not in source.params or source.params[name].shape != target.params[name].shape:
            raise ContractViolation(
                f"{what}: тензор '{name}' отсутствует или имеет другую форму"
            )
        target.params[name] = source.params[name].copy()


def assemble_model(model_cfg: ModelConfig, vocab: Vocab, seed: int,
                   lm_source: VisuallyGuidedLM | None = None,
                   map_source: VisuallyGuidedLM | None = None) -> VisuallyGuidedLM:
    """Инициализация по seed, затем LM и/или отображающая сеть из готовых моделей."""
    model = VisuallyGuidedLM.init(model_cfg, seed, vocab)
    if lm_source is not None:
        if lm_source.vocab is not None and lm_source.vocab.tokens != vocab.tokens:
            raise ContractViolation("Словарь исходной LM не совпадает со словарём корпуса")
        _copy_group(model, lm_source, model.lm_names, "LM")
    if map_source is not None:
        _copy_group(model, map_source, model.map_names, "Отображающая сеть")
    return model


def build_initial_model(model_cfg: ModelConfig, vocab: Vocab, cfg: TrainConfig,
                        lm_ckpt: Path | None = None, map_ckpt: Path | None = None,
                        log_callback=None) -> VisuallyGuidedLM:
    """
    Начальная модель для дообучения: LM из lm_ckpt (если задан),
    отображающая сеть из map_ckpt при pretrain_map, остальное - инициализация по seed.
    """
    lm_source = map_source = None
    if lm_ckpt is not None:
        lm_source, _ = VisuallyGuidedLM.load(lm_ckpt)
        if log_callback:
            log_callback(f"LM загружается из {Path(lm_ckpt).name}", "info")

    if cfg.pretrain_map:
        if not model_cfg.has_prefix:
            raise StartupError("pretrain_map=true, но префикс отключён (prefix_len=0)")
        if map_ckpt is None or not Path(map_ckpt).is_file():
            raise StartupError(
                f"pretrain_map=true, но чекпоинт отображающей сети не найден: {map_ckpt}"
            )
        map_source, _ = VisuallyGuidedLM.load(map_ckpt)
        if log_callback:
            log_callback(f"Отображающая сеть загружается из {Path(map_ckpt).name}", "info")
    return assemble_model(model_cfg, vocab, cfg.seed, lm_source, map_source)

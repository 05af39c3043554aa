"""
Сетки абляций на одном корпусе:

mapping      - вариант отображающей сети x длина префикса (+ текстовая модель l=0);
tuning       - 8 комбинаций флагов tune_lm / pretrain_map / tune_map;
contrastive  - lambda = 0 против lambda из пресета.

Каждая ячейка обучается для каждого seed; в отчёт идут средние и
стандартные отклонения валидационной CE.
"""
import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.app_config import (
    ABLATION_GRIDS, ABLATION_PREFIX_LENS, ABLATION_RESULT_NAME,
    ALIGNMENT_PROBE_SIZE, MAPPING_VARIANTS
)
from src.errors import ContractViolation
from src.model.config import ModelConfig
from src.model.vglm import VisuallyGuidedLM
from src.textdata.corpus import Example
from src.textdata.vocab import Vocab
from src.training.config import PretrainConfig, TrainConfig
from src.training.evaluation import alignment_gap, evaluate_perplexity
from src.training.finetune import TrainingHooks, assemble_model, finetune
from src.training.pretrain import pretrain_mapping


@dataclass
class AblationCell:
    name: str
    model_overrides: dict = field(default_factory=dict)
    train_overrides: dict = field(default_factory=dict)
    val_ce: list[float] = field(default_factory=list)
    alignment: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.val_ce))

    @property
    def std(self) -> float:
        return float(np.std(self.val_ce))

    def as_dict(self) -> dict:
        data = {
            "name": self.name,
            "settings": {**self.model_overrides, **self.train_overrides},
            "val_ce": self.val_ce,
            "mean": self.mean,
            "std": self.std,
        }
        if self.alignment:
            data["alignment_gap"] = self.alignment
            data["alignment_gap_mean"] = float(np.mean(self.alignment))
        return data


def _flag(value: bool) -> str:
    return "1" if value else "0"


def grid_cells(grid: str, train_cfg: TrainConfig) -> list[AblationCell]:
    if grid == "mapping":
        cells = [AblationCell("text-only l=0", {"prefix_len": 0})]
        for variant, l in itertools.product(MAPPING_VARIANTS, ABLATION_PREFIX_LENS):
            cells.append(AblationCell(
                f"{variant} l={l}",
                {"mapping_variant": variant, "prefix_len": l, "mapping_layers": 0},
            ))
        return cells
    if grid == "tuning":
        return [
            AblationCell(
                f"lm={_flag(lm)},pre={_flag(pre)},map={_flag(tm)}",
                train_overrides={"tune_lm": lm, "pretrain_map": pre, "tune_map": tm},
            )
            for lm, pre, tm in itertools.product((True, False), repeat=3)
        ]
    if grid == "contrastive":
        return [
            AblationCell("lambda=0", train_overrides={"lambda_": 0.0}),
            AblationCell(f"lambda={train_cfg.lambda_}",
                         train_overrides={"lambda_": train_cfg.lambda_}),
        ]
    raise ContractViolation(f"Неизвестная сетка абляции: {grid}")


def _train_cell(cell: AblationCell, model_cfg: ModelConfig, train_cfg: TrainConfig,
                vocab: Vocab, train: list[Example], seed: int,
                pretrained: VisuallyGuidedLM | None, hooks: TrainingHooks) -> VisuallyGuidedLM:
    cfg_m = dataclasses.replace(model_cfg, **cell.model_overrides)
    cfg_t = dataclasses.replace(train_cfg, seed=seed, **cell.train_overrides)
    map_source = pretrained if cfg_t.pretrain_map else None
    model = assemble_model(cfg_m, vocab, seed, lm_source=pretrained, map_source=map_source)
    return finetune(model, train, cfg_t, hooks=hooks).model


def run_ablation(grid: str, model_cfg: ModelConfig, train_cfg: TrainConfig,
                 vocab: Vocab, train: list[Example], val: list[Example],
                 seeds: list[int], pretrain_cfg: PretrainConfig | None = None,
                 out_dir: Path | None = None, log_callback=None) -> dict:
    """
    Для сетки tuning сначала на каждом seed предобучается отображающая сеть;
    её LM служит базовой LM всех восьми ячеек.
    """
    if grid not in ABLATION_GRIDS:
        raise ContractViolation(f"Неизвестная сетка абляции: {grid}")
    if not seeds:
        raise ContractViolation("Нужен хотя бы один seed")
    if not val:
        raise ContractViolation("Для абляции нужен валидационный корпус")

    def quiet(message, level):
        # подробности отдельных запусков не нужны, только предупреждения
        if log_callback and level != "info":
            log_callback(message, level)
    hooks = TrainingHooks(log_callback=quiet)

    cells = grid_cells(grid, train_cfg)
    for seed in seeds:
        pretrained = None
        if grid == "tuning":
            if pretrain_cfg is None:
                raise ContractViolation("Сетка tuning требует конфигурацию предобучения")
            base = VisuallyGuidedLM.init(model_cfg, seed, vocab)
            pretrained = pretrain_mapping(
                base, train, dataclasses.replace(pretrain_cfg, seed=seed), hooks=hooks
            ).model

        for cell in cells:
            model = _train_cell(cell, model_cfg, train_cfg, vocab, train,
                                seed, pretrained, hooks)
            ce = evaluate_perplexity(model, val).cross_entropy
            cell.val_ce.append(ce)
            if grid == "contrastive" and model.cfg.has_prefix:
                cell.alignment.append(alignment_gap(model, val[:ALIGNMENT_PROBE_SIZE]))
            if log_callback:
                log_callback(f"  [{grid}] seed={seed} {cell.name}: val_ce={ce:.4f}", "info")

    report = {
        "grid": grid,
        "seeds": list(seeds),
        "cells": [cell.as_dict() for cell in cells],
    }
    best = min(cells, key=lambda c: c.mean)
    report["best"] = best.name
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / ABLATION_RESULT_NAME
        path.write_text(json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        if log_callback:
            log_callback(f"Результаты абляции: {path}", "info")
    return report


def compare_prefix_benefit(model_cfg: ModelConfig, train_cfg: TrainConfig, vocab: Vocab,
                           train: list[Example], val: list[Example], seeds: list[int],
                           log_callback=None) -> dict:
    """
    Валидационная CE модели с префиксом и текстовой модели (l=0)
    при одинаковом бюджете; reduction = 1 - prefix / text_only.
    """
    if not model_cfg.has_prefix:
        raise ContractViolation("Модель с префиксом должна иметь prefix_len > 0")
    cells = [AblationCell("prefix"), AblationCell("text-only", {"prefix_len": 0})]
    hooks = TrainingHooks()
    for seed in seeds:
        for cell in cells:
            model = _train_cell(cell, model_cfg, train_cfg, vocab, train, seed, None, hooks)
            cell.val_ce.append(evaluate_perplexity(model, val).cross_entropy)
    prefix_ce, text_ce = cells[0].mean, cells[1].mean
    result = {
        "prefix_ce": prefix_ce,
        "text_only_ce": text_ce,
        "reduction": 1.0 - prefix_ce / text_ce,
    }
    if log_callback:
        log_callback(
            f"Префикс: CE={prefix_ce:.4f}, без префикса: CE={text_ce:.4f}, "
            f"снижение {result['reduction']:.1%}",
            "info"
        )
    return result

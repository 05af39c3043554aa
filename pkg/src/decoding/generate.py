import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.errors import ContractViolation, InlgError, LengthOverflowError
from src.decoding.beam import BeamHypothesis, DecodeConfig, beam_search
from src.model.vglm import VisuallyGuidedLM
from src.textdata.corpus import RawRecord, resolve_feature
from src.textdata.features import FeatureTable
from src.textdata.vocab import tokenize


class ModelScorer:
    """Оценщик следующего токена для одного примера; префикс считается один раз."""

    def __init__(self, model: VisuallyGuidedLM, feature: np.ndarray, context_ids: list[int]):
        self.model = model
        self.context_ids = list(context_ids)
        self.prefix = model.map_features(feature) if model.cfg.has_prefix else None

    def __call__(self, sequences: list[list[int]]) -> np.ndarray:
        return self.model.next_token_logprobs(self.prefix, self.context_ids, sequences)


@dataclass
class GenerationRecord:
    id: str
    text: str | None = None
    logprob: float | None = None
    finished: bool | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        if self.error is not None:
            return {"id": self.id, "error": self.error}
        return {"id": self.id, "text": self.text, "logprob": self.logprob,
                "finished": self.finished}


def decode_example(model: VisuallyGuidedLM, feature: np.ndarray, context_ids: list[int],
                   cfg: DecodeConfig, example_id: str | None = None) -> list[BeamHypothesis]:
    try:
        model.cfg.check_length(len(context_ids), cfg.max_output_len, example_id)
    except LengthOverflowError as e:
        raise LengthOverflowError(f"{e.args[0]} (с учётом max_len)") from None
    return beam_search(ModelScorer(model, feature, context_ids), cfg)


def _generate_one(model: VisuallyGuidedLM, record: RawRecord,
                  features: FeatureTable | None, cfg: DecodeConfig,
                  lowercase: bool) -> GenerationRecord:
    try:
        feature = resolve_feature(record, features, model.cfg.d_v)
        context_ids = model.vocab.encode(tokenize(record.context, model.vocab.mode, lowercase))
        best = decode_example(model, feature, context_ids, cfg, record.id)[0]
    except InlgError as e:
        return GenerationRecord(id=record.id, error=str(e))
    return GenerationRecord(
        id=record.id,
        text=model.vocab.decode_text(best.tokens),
        logprob=best.logprob,
        finished=best.finished,
    )


def generate(model: VisuallyGuidedLM, records: list[RawRecord],
             features: FeatureTable | None, cfg: DecodeConfig, workers: int = 1,
             lowercase: bool = True, log_callback=None) -> list[GenerationRecord]:
    """
    Генерация для каждого примера независимо; результаты в порядке входа.
    Ошибка в отдельном примере становится записью {id, error}.
    """
    if model.vocab is None:
        raise ContractViolation("В чекпоинте нет словаря: генерация невозможна")
    if features is not None and features.dim != model.cfg.d_v:
        raise ContractViolation(
            f"Размерность признаков {features.dim} не совпадает с d_v={model.cfg.d_v}"
        )

    def run(record):
        return _generate_one(model, record, features, cfg, lowercase)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, records))
    else:
        results = [run(record) for record in records]

    if log_callback:
        for r in results:
            if r.error is not None:
                log_callback(f"  [{r.id}] пропущен: {r.error}", "warning")
        failed = sum(r.error is not None for r in results)
        log_callback(
            f"Сгенерировано {len(results) - failed} из {len(results)} "
            f"(луч {cfg.beam_width}, max_len {cfg.max_output_len})",
            "info"
        )
    return results


def write_generations(results: list[GenerationRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in results:
            f.write(json.dumps(r.as_dict(), ensure_ascii=False) + "\n")
    return path

"""
Синтетический "заземлённый мир" вместо генерации изображений.

Каждый пример - случайное подмножество атрибутов. Признак - k-hot вектор
атрибутов в первых k координатах d_v плюс гауссов шум. Цель называет атрибуты
в каноническом порядке, а контекст одинаков для всех примеров, поэтому
без признака атрибуты из текста не восстановить.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.app_config import (
    SYNTHETIC_ATTRIBUTE_WORDS, SYNTHETIC_CONTEXT, SYNTHETIC_FEATURES_NAME,
    SYNTHETIC_MAX_PER_EXAMPLE, SYNTHETIC_NOISE_STD, SYNTHETIC_NUM_ATTRIBUTES,
    SYNTHETIC_SPLITS, SYNTHETIC_TARGET_TEMPLATE, DEFAULT_D_V
)
from src.errors import ContractViolation
from src.numcore.rng import make_rng
from src.textdata.corpus import write_corpus
from src.textdata.features import FeatureTable, write_features


@dataclass
class SyntheticWorldSpec:
    num_attributes: int = SYNTHETIC_NUM_ATTRIBUTES
    d_v: int = DEFAULT_D_V
    attribute_words: tuple[str, ...] = SYNTHETIC_ATTRIBUTE_WORDS
    noise_std: float = SYNTHETIC_NOISE_STD
    context_template: str = SYNTHETIC_CONTEXT
    target_template: str = SYNTHETIC_TARGET_TEMPLATE
    max_per_example: int = SYNTHETIC_MAX_PER_EXAMPLE
    examples_per_split: dict[str, int] = field(
        default_factory=lambda: dict(SYNTHETIC_SPLITS)
    )

    def __post_init__(self):
        if self.num_attributes < 1 or self.num_attributes > self.d_v:
            raise ContractViolation(
                f"Число атрибутов {self.num_attributes} должно быть в [1, d_v={self.d_v}]"
            )
        if self.num_attributes > len(self.attribute_words):
            raise ContractViolation(
                f"Слов атрибутов {len(self.attribute_words)} меньше, "
                f"чем атрибутов {self.num_attributes}"
            )
        if self.noise_std < 0:
            raise ContractViolation(f"noise_std не может быть отрицательным: {self.noise_std}")
        if not 1 <= self.max_per_example <= self.num_attributes:
            raise ContractViolation(
                f"max_per_example={self.max_per_example} вне [1, {self.num_attributes}]"
            )

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.attribute_words[:self.num_attributes])


def attribute_feature(spec: SyntheticWorldSpec, attributes: list[int],
                      rng: np.random.Generator | None = None) -> np.ndarray:
    feature = np.zeros(spec.d_v, dtype=np.float32)
    feature[attributes] = 1.0
    if spec.noise_std > 0 and rng is not None:
        feature += rng.normal(0.0, spec.noise_std, size=spec.d_v).astype(np.float32)
    return feature


def attribute_sentence(spec: SyntheticWorldSpec, attributes: list[int]) -> str:
    words = " ".join(spec.words[i] for i in sorted(attributes))
    return spec.target_template.format(attributes=words)


def decode_attributes(spec: SyntheticWorldSpec, feature: np.ndarray) -> list[int]:
    """Оракул: атрибуты по признаку (порог 0.5 по первым k координатам)."""
    return [i for i in range(spec.num_attributes) if feature[i] > 0.5]


def generate_split(spec: SyntheticWorldSpec, split: str, count: int,
                   rng: np.random.Generator, table: FeatureTable) -> list[dict]:
    records = []
    for i in range(count):
        size = int(rng.integers(1, spec.max_per_example + 1))
        attributes = sorted(
            int(a) for a in rng.choice(spec.num_attributes, size=size, replace=False)
        )
        feature_id = f"{split}-{i:05d}"
        table.add(feature_id, attribute_feature(spec, attributes, rng))
        records.append({
            "id": feature_id,
            "context": spec.context_template,
            "target": attribute_sentence(spec, attributes),
            "feature_id": feature_id,
        })
    return records


def gen_synthetic(spec: SyntheticWorldSpec, seed: int, out_dir: Path,
                  log_callback=None) -> dict[str, Path]:
    """
    Пишет {split}.jsonl для каждого сплита и общий файл признаков.
    Возвращает пути по ключам сплитов и 'features'.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = make_rng(seed, "synthetic")
    table = FeatureTable(dim=spec.d_v)
    paths = {}
    for split, count in spec.examples_per_split.items():
        records = generate_split(spec, split, count, rng, table)
        paths[split] = write_corpus(records, out_dir / f"{split}.jsonl")
        if log_callback:
            log_callback(f"  Сплит {split}: {count} примеров", "info")
    paths["features"] = write_features(table, out_dir / SYNTHETIC_FEATURES_NAME)
    if log_callback:
        log_callback(
            f"Синтетический мир: k={spec.num_attributes}, d_v={spec.d_v}, "
            f"шум={spec.noise_std} -> {out_dir}",
            "info"
        )
    return paths

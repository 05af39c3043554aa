import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.app_config import EOS_ID
from src.errors import ContractViolation, DanglingReferenceError, IngestError
from src.textdata.features import FeatureTable
from src.textdata.vocab import Vocab, tokenize


@dataclass(frozen=True)
class Example:
    id: str
    context_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    feature: np.ndarray

    def __post_init__(self):
        if len(self.target_ids) < 1 or self.target_ids[-1] != EOS_ID:
            raise ContractViolation(f"[{self.id}] цель должна быть непустой и оканчиваться EOS")

    @property
    def m(self) -> int:
        return len(self.context_ids)

    @property
    def n(self) -> int:
        return len(self.target_ids)


@dataclass(frozen=True)
class RawRecord:
    line_no: int
    id: str
    context: str
    target: str
    feature_id: str | None
    feature: list | None


def read_jsonl_records(path: Path, require_target: bool = True) -> list[RawRecord]:
    """Читает JSONL корпуса; ошибки содержат номер строки (с 1)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Корпус не найден: {path}")

    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise IngestError(f"некорректный JSON ({e.msg})", line_no=line_no)
            if not isinstance(obj, dict):
                raise IngestError("ожидался JSON-объект", line_no=line_no)
            if "id" not in obj:
                raise IngestError("нет поля 'id'", line_no=line_no)

            target = obj.get("target", "")
            if not isinstance(target, str) or not isinstance(obj.get("context", ""), str):
                raise IngestError("поля 'context' и 'target' должны быть строками",
                                  line_no=line_no)
            if require_target and not target.strip():
                raise IngestError("пустая цель (n >= 1)", line_no=line_no)
            if "feature_id" not in obj and "feature" not in obj:
                raise IngestError("нет ни 'feature_id', ни 'feature'", line_no=line_no)

            records.append(RawRecord(
                line_no=line_no,
                id=str(obj["id"]),
                context=obj.get("context", ""),
                target=target,
                feature_id=obj.get("feature_id"),
                feature=obj.get("feature"),
            ))
    return records


def resolve_feature(record: RawRecord, features: FeatureTable | None,
                    d_v: int | None) -> np.ndarray:
    if record.feature is not None:
        try:
            vector = np.asarray(record.feature, dtype=np.float32)
        except (TypeError, ValueError):
            raise IngestError("поле 'feature' не является списком чисел",
                              line_no=record.line_no)
        if not np.isfinite(vector).all():
            raise IngestError("поле 'feature' содержит NaN или бесконечность",
                              line_no=record.line_no)
    else:
        if features is None or record.feature_id not in features:
            raise DanglingReferenceError(str(record.feature_id), line_no=record.line_no)
        vector = features[record.feature_id]
    if vector.ndim != 1 or (d_v is not None and vector.shape[0] != d_v):
        raise IngestError(
            f"размерность признака {vector.shape} не совпадает с d_v={d_v}",
            line_no=record.line_no
        )
    return vector


def load_corpus(
    path: Path,
    vocab_mode: str = "word",
    features: FeatureTable | None = None,
    vocab: Vocab | None = None,
    lowercase: bool = True,
    log_callback=None
) -> tuple[list[Example], Vocab]:
    """
    Загружает корпус JSONL и кодирует его.
    Если vocab не передан, словарь строится по этому (обучающему) файлу;
    иначе неизвестные токены становятся UNK.
    """
    records = read_jsonl_records(path)
    if vocab is None:
        vocab = Vocab.build(
            (text for r in records for text in (r.context, r.target)),
            mode=vocab_mode, lowercase=lowercase
        )
    elif vocab.mode != vocab_mode:
        raise ContractViolation(
            f"Режим словаря '{vocab.mode}' не совпадает с запрошенным '{vocab_mode}'"
        )

    d_v = features.dim if features is not None else None
    examples = []
    seen_ids = set()
    for record in records:
        if record.id in seen_ids:
            raise IngestError(f"повторный id '{record.id}'", line_no=record.line_no)
        seen_ids.add(record.id)
        feature = resolve_feature(record, features, d_v)
        if d_v is None:
            d_v = feature.shape[0]
        context_ids = vocab.encode(tokenize(record.context, vocab.mode, lowercase))
        target_ids = vocab.encode(tokenize(record.target, vocab.mode, lowercase)) + [EOS_ID]
        examples.append(Example(
            id=record.id,
            context_ids=tuple(context_ids),
            target_ids=tuple(target_ids),
            feature=feature,
        ))

    if log_callback:
        log_callback(
            f"Корпус {Path(path).name}: {len(examples)} примеров, "
            f"словарь {len(vocab)} токенов ({vocab.mode})",
            "info"
        )
    return examples, vocab


def write_corpus(records: list[dict], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    return path

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from src.errors import IngestError
from src.metrics.degeneration import DISTINCT_DENOMINATORS, TextMetrics
from src.textdata.vocab import tokenize

CORPUS_KEYS = ("rep_2", "rep_3", "rep_4", "diversity", "distinct_2")


@dataclass
class MetricsReport:
    """Значения корпуса - среднее по текстам (макро)."""
    tokenization: str
    distinct_denominator: str
    texts: int
    tokens: int
    corpus: dict[str, float]
    distinct_skipped: int = 0
    per_text: list[TextMetrics] = field(default_factory=list)

    def as_dict(self, include_per_text: bool = False) -> dict:
        data = {
            "tokenization": self.tokenization,
            "distinct_denominator": self.distinct_denominator,
            "texts": self.texts,
            "tokens": self.tokens,
            "distinct_skipped": self.distinct_skipped,
            **self.corpus,
        }
        if include_per_text:
            data["per_text"] = [asdict(m) for m in self.per_text]
        return data


def report(texts: list[tuple[str, str]], mode: str = "word", lowercase: bool = True,
           denominator: str = "tokens") -> MetricsReport:
    """texts - пары (id, текст); токенизация в том же режиме, что и у модели."""
    if not texts:
        raise IngestError("Нет ни одного текста для оценки")
    if denominator not in DISTINCT_DENOMINATORS:
        raise IngestError(f"Неизвестный знаменатель distinct-n: {denominator}")
    per_text = [
        TextMetrics.compute(text_id, tokenize(text, mode, lowercase), denominator)
        for text_id, text in texts
    ]
    corpus = {}
    for key in CORPUS_KEYS:
        values = [getattr(m, key) for m in per_text if getattr(m, key) is not None]
        corpus[key] = float(np.mean(values)) if values else 0.0
    return MetricsReport(
        tokenization=mode,
        distinct_denominator=denominator,
        texts=len(per_text),
        tokens=sum(m.tokens for m in per_text),
        corpus=corpus,
        distinct_skipped=sum(m.distinct_2 is None for m in per_text),
        per_text=per_text,
    )


def read_texts(path: Path, log_callback=None) -> list[tuple[str, str]]:
    """
    Читает JSONL {"id", "text"}. Записи об ошибках генерации ({"id", "error"})
    пропускаются с предупреждением.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Файл текстов не найден: {path}")
    texts = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise IngestError(f"некорректный JSON ({e.msg})", line_no=line_no)
            if not isinstance(obj, dict) or "id" not in obj:
                raise IngestError("ожидался объект с полем 'id'", line_no=line_no)
            if "error" in obj and "text" not in obj:
                skipped += 1
                continue
            if not isinstance(obj.get("text"), str):
                raise IngestError("поле 'text' отсутствует или не строка", line_no=line_no)
            texts.append((str(obj["id"]), obj["text"]))
    if skipped and log_callback:
        log_callback(f"Пропущено записей с ошибкой генерации: {skipped}", "warning")
    if not texts:
        raise IngestError(f"Файл {path.name} не содержит текстов")
    return texts


def write_report(result: MetricsReport, out_path: Path, csv_path: Path | None = None) -> Path:
    """JSON-отчёт пишется только целиком; CSV - по строке на текст."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(result.as_dict(), ensure_ascii=False, indent=2) + "\n"
    tmp_path = out_path.with_name(out_path.name + ".tmp")
    tmp_path.write_text(payload, encoding="utf-8")
    tmp_path.replace(out_path)

    if csv_path is not None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        columns = ["id", "tokens", "rep_2", "rep_3", "rep_4", "diversity", "distinct_2"]
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            writer.writeheader()
            for m in result.per_text:
                row = asdict(m)
                row["distinct_2"] = "" if m.distinct_2 is None else m.distinct_2
                writer.writerow(row)
    return out_path

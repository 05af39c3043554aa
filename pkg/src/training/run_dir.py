"""
Директория запуска:
    config.snapshot    - разрешённая конфигурация key=value
    train.log.jsonl    - одна JSON-запись на шаг оптимизатора
    vocab.txt          - словарь
    ckpt/epNNN.inlgckpt, ckpt/best.inlgckpt
"""
import json
from pathlib import Path

from src.app_config import (
    BEST_CKPT_NAME, CHECKPOINT_SUFFIX, CKPT_SUBDIR, CONFIG_SNAPSHOT_NAME,
    MAPPING_CKPT_NAME, TRAIN_LOG_NAME, VOCAB_FILE_NAME
)

LOG_KEYS = ("step", "ep", "teacher", "contrastive", "lambda_effective", "lr")


class RunDir:
    def __init__(self, path: Path):
        self.path = Path(path)

    def prepare(self) -> "RunDir":
        (self.path / CKPT_SUBDIR).mkdir(parents=True, exist_ok=True)
        return self

    @property
    def snapshot_path(self) -> Path:
        return self.path / CONFIG_SNAPSHOT_NAME

    @property
    def log_path(self) -> Path:
        return self.path / TRAIN_LOG_NAME

    @property
    def vocab_path(self) -> Path:
        return self.path / VOCAB_FILE_NAME

    @property
    def best_path(self) -> Path:
        return self.path / CKPT_SUBDIR / BEST_CKPT_NAME

    @property
    def mapping_path(self) -> Path:
        return self.path / CKPT_SUBDIR / MAPPING_CKPT_NAME

    def epoch_path(self, ep: int) -> Path:
        return self.path / CKPT_SUBDIR / f"ep{ep:03d}{CHECKPOINT_SUFFIX}"

    def start_log(self) -> None:
        """Новый запуск начинает журнал заново."""
        self.prepare()
        self.log_path.write_text("", encoding="utf-8")

    def append_log(self, record: dict) -> None:
        line = json.dumps({key: record[key] for key in LOG_KEYS}, ensure_ascii=False)
        with open(self.log_path, "a", encoding="utf-8", newline="\n") as f:
            f.write(line + "\n")


def read_log(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]

import sys
from pathlib import Path

import pytest

# Добавляем корневую директорию проекта в sys.path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.model.config import ModelConfig  # noqa: E402
from src.textdata.synthetic import SyntheticWorldSpec, gen_synthetic  # noqa: E402
from src.training.diagnostics import tiny_batch as make_tiny_batch  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: долгие эксперименты на синтетическом мире")


@pytest.fixture
def mock_logger():
    """Фикстура для мок-логгера"""
    logs = []

    def _mock_logger(msg: str, level: str = "info"):
        print(f"[{level}] {msg}")  # Выводим логи в консоль при тестировании
        logs.append((msg, level))
    _mock_logger.logs = logs  # Сохраняем логи для проверки
    return _mock_logger


@pytest.fixture
def tiny_config():
    """Крошечная модель: d_model=16, 2 слоя, словарь 20, префикс 4"""
    return ModelConfig.tiny()


@pytest.fixture
def tiny_batch(tiny_config):
    return make_tiny_batch(tiny_config, seed=0)


@pytest.fixture
def synthetic_world(tmp_path):
    """Небольшой синтетический мир во временной папке"""
    spec = SyntheticWorldSpec(examples_per_split={"train": 48, "val": 16})
    paths = gen_synthetic(spec, seed=7, out_dir=tmp_path / "world")
    paths["spec"] = spec
    return paths


@pytest.fixture
def world_corpus(synthetic_world):
    """Загруженный синтетический мир: (train, val, vocab, model_cfg)"""
    from src.textdata.corpus import load_corpus
    from src.textdata.features import read_features

    table = read_features(synthetic_world["features"])
    train, vocab = load_corpus(synthetic_world["train"], features=table)
    val, _ = load_corpus(synthetic_world["val"], features=table, vocab=vocab)
    cfg = ModelConfig.tiny(vocab_size=len(vocab), d_v=table.dim)
    return train, val, vocab, cfg

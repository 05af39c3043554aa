"""
Разрешение конфигурации запуска: флаги > файл > значения по умолчанию.

Файл конфигурации - UTF-8, строки key=value, комментарии с '#'.
Пресет задачи (и --paper-hparams) подмешивается в слой умолчаний,
поэтому файл и флаги по-прежнему его перекрывают.
"""
from dataclasses import dataclass, field
from pathlib import Path

from src.app_config import (
    DEFAULT_BATCH_SIZE, DEFAULT_BEAM_WIDTH, DEFAULT_D_FF, DEFAULT_D_MODEL, DEFAULT_D_V,
    DEFAULT_DROPOUT, DEFAULT_EPOCHS, DEFAULT_GRAD_CLIP, DEFAULT_LENGTH_ALPHA, DEFAULT_LR,
    DEFAULT_MAPPING_VARIANT, DEFAULT_MAX_POSITIONS, DEFAULT_MLP_HIDDEN, DEFAULT_N_HEADS,
    DEFAULT_N_LAYERS, DEFAULT_POOLING, DEFAULT_PREFIX_LEN, DEFAULT_TASK_PRESET, DEFAULT_TAU,
    DEFAULT_WARMUP_STEPS, DEFAULT_WEIGHT_DECAY, DENOMINATOR_MODES, LOSS_REDUCTIONS,
    MAPPING_VARIANTS, PAPER_HPARAMS, POOLING_MODES, PRETRAIN_BATCH_SIZE, PRETRAIN_EPOCHS,
    PRETRAIN_WARMUP_STEPS, TASK_PRESETS, VOCAB_MODES
)
from src.decoding.beam import DecodeConfig
from src.errors import ConfigError
from src.model.config import ModelConfig
from src.training.config import PretrainConfig, TrainConfig


@dataclass(frozen=True)
class ConfigKey:
    kind: str
    default: object
    choices: tuple | None = None
    help: str = ""


SCHEMA: dict[str, ConfigKey] = {
    # модель
    "d_model": ConfigKey("int", DEFAULT_D_MODEL, help="размер скрытого слоя"),
    "n_layers": ConfigKey("int", DEFAULT_N_LAYERS, help="число блоков LM"),
    "n_heads": ConfigKey("int", DEFAULT_N_HEADS),
    "d_ff": ConfigKey("int", DEFAULT_D_FF),
    "max_positions": ConfigKey("int", DEFAULT_MAX_POSITIONS),
    "prefix_len": ConfigKey("int", DEFAULT_PREFIX_LEN, help="длина визуального префикса (0 - без префикса)"),
    "d_v": ConfigKey("int", DEFAULT_D_V, help="размерность признаков"),
    "mapping": ConfigKey("str", DEFAULT_MAPPING_VARIANT, MAPPING_VARIANTS),
    "mapping_layers": ConfigKey("int", 0, help="0 - по умолчанию для варианта"),
    "mlp_hidden": ConfigKey("int", DEFAULT_MLP_HIDDEN),
    "dropout": ConfigKey("float", DEFAULT_DROPOUT),
    "pooling": ConfigKey("str", DEFAULT_POOLING, POOLING_MODES),
    # данные
    "train": ConfigKey("str", "", help="обучающий JSONL"),
    "val": ConfigKey("str", "", help="валидационный JSONL"),
    "features": ConfigKey("str", "", help="файл признаков"),
    "vocab_mode": ConfigKey("str", "word", VOCAB_MODES),
    "lowercase": ConfigKey("bool", True),
    # обучение
    "seed": ConfigKey("optional_int", None),
    "epochs": ConfigKey("int", DEFAULT_EPOCHS),
    "batch_size": ConfigKey("int", DEFAULT_BATCH_SIZE),
    "lr": ConfigKey("float", DEFAULT_LR),
    "weight_decay": ConfigKey("float", DEFAULT_WEIGHT_DECAY),
    "warmup_steps": ConfigKey("int", DEFAULT_WARMUP_STEPS),
    "grad_clip": ConfigKey("float", DEFAULT_GRAD_CLIP),
    "tune_lm": ConfigKey("bool", True),
    "pretrain_map": ConfigKey("bool", False),
    "tune_map": ConfigKey("bool", True),
    "map_ckpt": ConfigKey("str", "", help="чекпоинт предобученной отображающей сети"),
    "lm_ckpt": ConfigKey("str", "", help="чекпоинт базовой LM"),
    # предобучение
    "pretrain_epochs": ConfigKey("int", PRETRAIN_EPOCHS),
    "pretrain_batch_size": ConfigKey("int", PRETRAIN_BATCH_SIZE),
    "pretrain_warmup_steps": ConfigKey("int", PRETRAIN_WARMUP_STEPS),
    "pretrain_lr": ConfigKey("float", DEFAULT_LR),
    "pretrain_tune_lm": ConfigKey("bool", True),
    # контрастивная цель
    "tau": ConfigKey("float", DEFAULT_TAU),
    "lambda": ConfigKey("float", TASK_PRESETS[DEFAULT_TASK_PRESET]["lambda"]),
    "n_no_contra": ConfigKey("int", TASK_PRESETS[DEFAULT_TASK_PRESET]["n_no_contra"]),
    "contrastive_denominator": ConfigKey("str", "standard", DENOMINATOR_MODES),
    "loss_reduction": ConfigKey("str", "mean", LOSS_REDUCTIONS),
    # декодирование
    "beam": ConfigKey("int", DEFAULT_BEAM_WIDTH),
    "max_len": ConfigKey("int", TASK_PRESETS[DEFAULT_TASK_PRESET]["max_len"]),
    "alpha": ConfigKey("float", DEFAULT_LENGTH_ALPHA),
    # пресеты
    "task_preset": ConfigKey("str", DEFAULT_TASK_PRESET, tuple(TASK_PRESETS)),
    "paper_hparams": ConfigKey("bool", False),
}

# ключи PAPER_HPARAMS -> ключи конфигурации
_PAPER_KEYS = {
    "lr": "lr", "batch_size": "batch_size", "epochs": "epochs",
    "warmup_steps": "warmup_steps", "weight_decay": "weight_decay", "beam": "beam",
    "prefix_len": "prefix_len", "mapping": "mapping", "mapping_layers": "mapping_layers",
}
_PRESET_KEYS = {"n_no_contra": "n_no_contra", "lambda": "lambda", "max_len": "max_len"}


def default_values() -> dict:
    return {key: spec.default for key, spec in SCHEMA.items()}


def parse_value(key: str, raw) -> object:
    if key not in SCHEMA:
        raise ConfigError(f"Неизвестный ключ конфигурации: '{key}'", key=key)
    spec = SCHEMA[key]
    if not isinstance(raw, str):
        value = raw
    else:
        text = raw.strip()
        try:
            if spec.kind == "int":
                value = int(text)
            elif spec.kind == "optional_int":
                value = int(text) if text else None
            elif spec.kind == "float":
                value = float(text)
            elif spec.kind == "bool":
                lowered = text.lower()
                if lowered in ("true", "1", "yes", "on"):
                    value = True
                elif lowered in ("false", "0", "no", "off"):
                    value = False
                else:
                    raise ValueError(text)
            else:
                value = text
        except ValueError:
            raise ConfigError(f"Некорректное значение '{raw}' для ключа '{key}'", key=key)
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(
            f"Значение '{value}' для '{key}' не из {list(spec.choices)}", key=key
        )
    return value


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{line_no}: ожидалась строка key=value")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{line_no}: неизвестный ключ '{key}'", key=key)
        raw[key] = value.strip()
    return raw


def read_config_file(path: Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Файл конфигурации не найден: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=path.name)


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def path(self, key: str) -> Path | None:
        value = self.values[key]
        return Path(value) if value else None

    def snapshot_text(self) -> str:
        return "".join(f"{key}={format_value(self.values[key])}\n" for key in sorted(self.values))

    def write_snapshot(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.snapshot_text(), encoding="utf-8")
        return path

    def model_config(self, vocab_size: int) -> ModelConfig:
        v = self.values
        return ModelConfig(
            vocab_size=vocab_size,
            d_model=v["d_model"],
            n_layers=v["n_layers"],
            n_heads=v["n_heads"],
            d_ff=v["d_ff"],
            max_positions=v["max_positions"],
            prefix_len=v["prefix_len"],
            d_v=v["d_v"],
            mapping_variant=v["mapping"],
            mapping_layers=v["mapping_layers"],
            mlp_hidden=v["mlp_hidden"],
            dropout=v["dropout"],
            pooling=v["pooling"],
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_values(self.values)

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig.from_values(self.values)

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            beam_width=self.values["beam"],
            max_output_len=self.values["max_len"],
            length_alpha=self.values["alpha"],
        )


def _layer(source) -> dict:
    if source is None:
        return {}
    if isinstance(source, (str, Path)):
        source = read_config_file(source)
    return {key: parse_value(key, value) for key, value in source.items()}


def resolve_config(defaults: dict | None = None, file=None, flags: dict | None = None) -> RunConfig:
    """
    file - путь к файлу или словарь строк key=value; flags - значения из командной строки
    (None означает "флаг не задан").
    """
    base = default_values() if defaults is None else {**default_values(), **defaults}
    file_layer = _layer(file)
    flag_layer = _layer({k: v for k, v in (flags or {}).items() if v is not None})

    def pick(key):
        for layer in (flag_layer, file_layer):
            if key in layer:
                return layer[key]
        return base[key]

    preset = TASK_PRESETS[pick("task_preset")]
    for preset_key, key in _PRESET_KEYS.items():
        base[key] = preset[preset_key]
    if pick("paper_hparams"):
        for paper_key, key in _PAPER_KEYS.items():
            base[key] = PAPER_HPARAMS[paper_key]

    values, provenance = {}, {}
    for key in SCHEMA:
        if key in flag_layer:
            values[key], provenance[key] = flag_layer[key], "flag"
        elif key in file_layer:
            values[key], provenance[key] = file_layer[key], "file"
        else:
            values[key], provenance[key] = base[key], "default"
    return RunConfig(values=values, provenance=provenance)


def read_snapshot(path: Path) -> RunConfig:
    """Снимок - обычный файл конфигурации: все ключи получают происхождение 'file'."""
    return resolve_config(file=Path(path))

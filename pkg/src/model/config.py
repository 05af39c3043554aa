from dataclasses import asdict, dataclass, fields

from src.app_config import (
    DEFAULT_D_FF, DEFAULT_D_MODEL, DEFAULT_D_V, DEFAULT_DROPOUT,
    DEFAULT_MAPPING_LAYERS, DEFAULT_MAPPING_VARIANT, DEFAULT_MAX_POSITIONS,
    DEFAULT_MLP_HIDDEN, DEFAULT_N_HEADS, DEFAULT_N_LAYERS, DEFAULT_POOLING,
    DEFAULT_PREFIX_LEN, INIT_STD, MAPPING_VARIANTS, POOLING_MODES, TINY_MODEL
)
from src.errors import ContractViolation, LengthOverflowError


@dataclass
class ModelConfig:
    """
    Размеры модели. prefix_len=0 отключает визуальный префикс
    (чисто текстовая модель без параметров отображающей сети).
    mapping_layers=0 означает значение по умолчанию для варианта.
    """
    vocab_size: int
    d_model: int = DEFAULT_D_MODEL
    n_layers: int = DEFAULT_N_LAYERS
    n_heads: int = DEFAULT_N_HEADS
    d_ff: int = DEFAULT_D_FF
    max_positions: int = DEFAULT_MAX_POSITIONS
    prefix_len: int = DEFAULT_PREFIX_LEN
    d_v: int = DEFAULT_D_V
    mapping_variant: str = DEFAULT_MAPPING_VARIANT
    mapping_layers: int = 0
    mlp_hidden: int = DEFAULT_MLP_HIDDEN
    dropout: float = DEFAULT_DROPOUT
    pooling: str = DEFAULT_POOLING
    init_std: float = INIT_STD

    def __post_init__(self):
        if self.mapping_layers == 0:
            self.mapping_layers = DEFAULT_MAPPING_LAYERS.get(self.mapping_variant, 0)
        if self.d_model <= 0 or self.n_heads <= 0 or self.d_model % self.n_heads != 0:
            raise ContractViolation(
                f"d_model={self.d_model} должен делиться на n_heads={self.n_heads}"
            )
        if self.vocab_size < 5:
            raise ContractViolation(f"Слишком маленький словарь: {self.vocab_size}")
        if self.prefix_len < 0:
            raise ContractViolation(f"prefix_len не может быть отрицательным: {self.prefix_len}")
        if self.d_v <= 0:
            raise ContractViolation(f"d_v должен быть положительным: {self.d_v}")
        if self.mapping_variant not in MAPPING_VARIANTS:
            raise ContractViolation(
                f"Неизвестный вариант отображающей сети: {self.mapping_variant}"
            )
        if self.mapping_layers < 1:
            raise ContractViolation(f"mapping_layers должен быть >= 1: {self.mapping_layers}")
        if self.pooling not in POOLING_MODES:
            raise ContractViolation(f"Неизвестный режим пулинга: {self.pooling}")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractViolation(f"dropout вне [0, 1): {self.dropout}")
        if self.max_positions <= self.prefix_len:
            raise ContractViolation(
                f"max_positions={self.max_positions} не вмещает префикс длины {self.prefix_len}"
            )

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def has_prefix(self) -> bool:
        return self.prefix_len > 0

    def check_length(self, m: int, n: int, example_id: str | None = None) -> None:
        """Позиции нумеруются 0..l+m+n, поэтому нужно l+m+n <= max_positions."""
        total = self.prefix_len + m + n
        if total > self.max_positions:
            raise LengthOverflowError(
                f"длина l+m+n={self.prefix_len}+{m}+{n}={total} "
                f"превышает max_positions={self.max_positions}",
                example_id=example_id
            )

    def to_header(self) -> dict[str, str]:
        return {f"model.{key}": repr(value) if isinstance(value, float) else str(value)
                for key, value in asdict(self).items()}

    @classmethod
    def from_header(cls, header: dict[str, str]) -> "ModelConfig":
        kwargs = {}
        for f in fields(cls):
            raw = header.get(f"model.{f.name}")
            if raw is None:
                continue
            if f.type in (int, "int"):
                kwargs[f.name] = int(raw)
            elif f.type in (float, "float"):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = raw
        if "vocab_size" not in kwargs:
            raise ContractViolation("В заголовке чекпоинта нет конфигурации модели")
        return cls(**kwargs)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Крошечная модель для градиентной проверки."""
        return cls(**{**TINY_MODEL, **overrides})

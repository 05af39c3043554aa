from dataclasses import dataclass

from src.app_config import (
    DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_GRAD_CLIP, DEFAULT_LR,
    DEFAULT_TAU, DEFAULT_WARMUP_STEPS, DEFAULT_WEIGHT_DECAY, LOSS_REDUCTIONS,
    PRETRAIN_BATCH_SIZE, PRETRAIN_EPOCHS, PRETRAIN_WARMUP_STEPS, TASK_PRESETS,
    DEFAULT_TASK_PRESET
)
from src.errors import ContractViolation
from src.objectives.losses import ContrastiveConfig

_PRESET = TASK_PRESETS[DEFAULT_TASK_PRESET]


@dataclass
class TrainConfig:
    """Параметры дообучения. Три флага заморозки независимы (8 комбинаций)."""
    seed: int
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    warmup_steps: int = DEFAULT_WARMUP_STEPS
    grad_clip: float = DEFAULT_GRAD_CLIP
    n_no_contra: int = _PRESET["n_no_contra"]
    lambda_: float = _PRESET["lambda"]
    tau: float = DEFAULT_TAU
    denominator_mode: str = "standard"
    loss_reduction: str = "mean"
    max_output_len: int = _PRESET["max_len"]
    tune_lm: bool = True
    pretrain_map: bool = False
    tune_map: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractViolation(f"epochs должно быть >= 1: {self.epochs}")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size должен быть >= 1: {self.batch_size}")
        if self.lr < 0 or self.weight_decay < 0 or self.warmup_steps < 0:
            raise ContractViolation("lr, weight_decay и warmup_steps не могут быть отрицательными")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            raise ContractViolation(f"Неизвестная редукция потерь: {self.loss_reduction}")
        # проверяет tau, lambda и режим знаменателя
        self.contrastive

    @property
    def contrastive(self) -> ContrastiveConfig:
        return ContrastiveConfig(
            tau=self.tau, denominator_mode=self.denominator_mode,
            lambda_=self.lambda_, n_no_contra=self.n_no_contra,
        )

    @classmethod
    def from_values(cls, values: dict) -> "TrainConfig":
        return cls(
            seed=values["seed"],
            epochs=values["epochs"],
            batch_size=values["batch_size"],
            lr=values["lr"],
            weight_decay=values["weight_decay"],
            warmup_steps=values["warmup_steps"],
            grad_clip=values["grad_clip"],
            n_no_contra=values["n_no_contra"],
            lambda_=values["lambda"],
            tau=values["tau"],
            denominator_mode=values["contrastive_denominator"],
            loss_reduction=values["loss_reduction"],
            max_output_len=values["max_len"],
            tune_lm=values["tune_lm"],
            pretrain_map=values["pretrain_map"],
            tune_map=values["tune_map"],
        )


@dataclass
class PretrainConfig:
    """
    Предобучение отображающей сети в постановке описания изображений.
    tune_lm=True обучает LM совместно (на настольном масштабе LM учится с нуля).
    """
    seed: int
    epochs: int = PRETRAIN_EPOCHS
    batch_size: int = PRETRAIN_BATCH_SIZE
    warmup_steps: int = PRETRAIN_WARMUP_STEPS
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    grad_clip: float = DEFAULT_GRAD_CLIP
    loss_reduction: str = "mean"
    tune_lm: bool = True

    def __post_init__(self):
        # epochs=0 допустимо: чекпоинт совпадает с инициализацией
        if self.epochs < 0:
            raise ContractViolation(f"epochs не может быть отрицательным: {self.epochs}")
        if self.batch_size < 1:
            raise ContractViolation(f"batch_size должен быть >= 1: {self.batch_size}")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            raise ContractViolation(f"Неизвестная редукция потерь: {self.loss_reduction}")

    def as_train_config(self) -> TrainConfig:
        """Тот же цикл обучения без контрастивного слагаемого."""
        return TrainConfig(
            seed=self.seed,
            epochs=max(self.epochs, 1),
            batch_size=self.batch_size,
            lr=self.lr,
            weight_decay=self.weight_decay,
            warmup_steps=self.warmup_steps,
            grad_clip=self.grad_clip,
            n_no_contra=0,
            lambda_=0.0,
            loss_reduction=self.loss_reduction,
            tune_lm=self.tune_lm,
            pretrain_map=False,
            tune_map=True,
        )

    @classmethod
    def from_values(cls, values: dict) -> "PretrainConfig":
        return cls(
            seed=values["seed"],
            epochs=values["pretrain_epochs"],
            batch_size=values["pretrain_batch_size"],
            warmup_steps=values["pretrain_warmup_steps"],
            lr=values["pretrain_lr"],
            weight_decay=values["weight_decay"],
            grad_clip=values["grad_clip"],
            loss_reduction=values["loss_reduction"],
            tune_lm=values["pretrain_tune_lm"],
        )

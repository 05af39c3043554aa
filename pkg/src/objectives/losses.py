"""
Цели обучения: teacher forcing, контрастивная InfoNCE и их сумма,
включаемая по номеру эпохи.
"""
from dataclasses import dataclass, field

import numpy as np

from src.app_config import DEFAULT_TAU, DENOMINATOR_MODES, LOSS_REDUCTIONS
from src.errors import ContractViolation
from src.numcore.graph import Graph, Node


@dataclass(frozen=True)
class ContrastiveConfig:
    tau: float = DEFAULT_TAU
    denominator_mode: str = "standard"
    lambda_: float = 1.0
    n_no_contra: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractViolation(f"Температура tau должна быть > 0: {self.tau}")
        if self.lambda_ < 0:
            raise ContractViolation(f"lambda не может быть отрицательной: {self.lambda_}")
        if self.n_no_contra < 0:
            raise ContractViolation(f"n_no_contra не может быть отрицательным: {self.n_no_contra}")
        if self.denominator_mode not in DENOMINATOR_MODES:
            raise ContractViolation(f"Неизвестный режим знаменателя: {self.denominator_mode}")

    def lambda_at(self, ep: int) -> float:
        """Граничная эпоха ep = n_no_contra уже относится ко второй фазе."""
        return 0.0 if ep < self.n_no_contra else self.lambda_


@dataclass
class LossBreakdown:
    teacher: float
    contrastive: float
    lambda_effective: float
    total: float
    batch_size: int = 0
    contrastive_skipped: bool = False
    node: Node | None = field(default=None, repr=False, compare=False)

    def as_record(self) -> dict:
        return {
            "teacher": self.teacher,
            "contrastive": self.contrastive,
            "lambda_effective": self.lambda_effective,
            "total": self.total,
        }


def teacher_loss(g: Graph, logits: Node, target_ids: np.ndarray, target_mask: np.ndarray,
                 reduction: str = "mean") -> Node:
    """
    -log p(y_j | ...) по строкам, отмеченным маской.
    mean - среднее по всем отмеченным токенам батча, sum - сумма.
    """
    if reduction not in LOSS_REDUCTIONS:
        raise ContractViolation(f"Неизвестная редукция потерь: {reduction}")
    mask = np.asarray(target_mask)
    if mask.ndim >= 2 and np.any(mask.reshape(mask.shape[0], -1).sum(axis=1) <= 0):
        raise ContractViolation("Маска цели пуста хотя бы у одного примера")
    return g.cross_entropy(logits, target_ids, mask, reduction=reduction)


def contrastive_loss(g: Graph, features, reps, cfg: ContrastiveConfig) -> Node | None:
    """
    InfoNCE между признаками V (B, d_v) и представлениями T (B, d_v).
    standard: знаменатель по всем j; paper: только по j != i.
    При B < 2 негативов нет, возвращается None.
    """
    features = features if isinstance(features, Node) else g.const(features)
    reps = reps if isinstance(reps, Node) else g.const(reps)
    if features.shape != reps.shape or len(features.shape) != 2:
        raise ContractViolation(
            f"Формы признаков {features.shape} и представлений {reps.shape} не согласованы"
        )
    batch = features.shape[0]
    if batch < 2:
        return None

    v = g.l2_normalize(features, axis=-1)
    t = g.l2_normalize(reps, axis=-1)
    sims = g.scale(g.matmul(v, g.transpose(t, (1, 0))), 1.0 / cfg.tau)
    where = None
    if cfg.denominator_mode == "paper":
        where = ~np.eye(batch, dtype=bool)
    lse = g.logsumexp(sims, axis=1, where=where)
    positives = g.index(sims, (np.arange(batch), np.arange(batch)))
    return g.mean(lse - positives)


def _value(x) -> float:
    return x.item() if isinstance(x, Node) else float(x)


def combined_loss(teacher, contrastive, ep: int, cfg: ContrastiveConfig,
                  batch_size: int = 0) -> LossBreakdown:
    """
    total = teacher + lambda_eff * contrastive, lambda_eff = 0 при ep < n_no_contra.

    contrastive может быть узлом, числом или функцией без аргументов.
    Функция не вызывается, пока слагаемое выключено (или lambda = 0),
    поэтому в первой фазе граф не содержит проекционной головы.
    """
    if ep < 0:
        raise ContractViolation(f"Номер эпохи не может быть отрицательным: {ep}")
    lam = cfg.lambda_at(ep)
    teacher_value = _value(teacher)

    term = None
    if lam > 0:
        term = contrastive() if callable(contrastive) else contrastive
    if term is None:
        return LossBreakdown(
            teacher=teacher_value, contrastive=0.0, lambda_effective=lam,
            total=teacher_value, batch_size=batch_size,
            contrastive_skipped=lam > 0,
            node=teacher if isinstance(teacher, Node) else None,
        )

    contrastive_value = _value(term)
    node = None
    if isinstance(teacher, Node):
        node = teacher + (term * lam if isinstance(term, Node) else lam * contrastive_value)
        total = node.item()
    else:
        total = teacher_value + lam * contrastive_value
    return LossBreakdown(
        teacher=teacher_value, contrastive=contrastive_value, lambda_effective=lam,
        total=total, batch_size=batch_size, node=node,
    )

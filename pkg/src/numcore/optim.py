from dataclasses import dataclass, field

import numpy as np

from src.app_config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_WEIGHT_DECAY
from src.errors import ContractViolation


@dataclass
class OptimizerState:
    """Моменты AdamW по именам параметров и счётчик шагов."""
    lr: float = 1e-3
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class LRSchedule:
    """Линейный разогрев до base_lr, затем константа."""
    base_lr: float
    warmup_steps: int = 0
    mode: str = "constant-after-warmup"


def lr_at(schedule: LRSchedule, step: int) -> float:
    if step < 0:
        raise ContractViolation(f"Номер шага не может быть отрицательным: {step}")
    if schedule.warmup_steps > 0 and step < schedule.warmup_steps:
        return schedule.base_lr * step / schedule.warmup_steps
    return schedule.base_lr


def optimizer_step(
    state: OptimizerState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    names: list[str] | None = None
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """
    Один шаг AdamW с коррекцией смещения и раздельным weight decay:
    w <- w - lr*wd*w, затем w <- w - lr*m_hat/(sqrt(v_hat)+eps).

    names - какие параметры обновлять (остальные возвращаются без изменений).
    Возвращает новый словарь параметров; исходный не изменяется.
    """
    if lr < 0:
        raise ContractViolation(f"Скорость обучения не может быть отрицательной: {lr}")
    names = list(params) if names is None else names

    step = state.step + 1
    bias1 = 1.0 - state.beta1 ** step
    bias2 = 1.0 - state.beta2 ** step
    new_params = dict(params)
    new_m = dict(state.m)
    new_v = dict(state.v)

    for name in names:
        w = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(w)
        if g.shape != w.shape:
            raise ContractViolation(
                f"Градиент '{name}' формы {g.shape} не совпадает с параметром {w.shape}"
            )
        m = new_m.get(name)
        v = new_v.get(name)
        if m is None:
            m = np.zeros_like(w)
            v = np.zeros_like(w)
        elif m.shape != w.shape:
            raise ContractViolation(f"Момент '{name}' формы {m.shape} не совпадает с {w.shape}")

        w = w - lr * state.weight_decay * w
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        w = w - lr * m_hat / (np.sqrt(v_hat) + state.eps)

        new_params[name] = w.astype(params[name].dtype, copy=False)
        new_m[name] = m.astype(params[name].dtype, copy=False)
        new_v[name] = v.astype(params[name].dtype, copy=False)

    new_state = OptimizerState(
        lr=lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps,
        weight_decay=state.weight_decay, step=step, m=new_m, v=new_v
    )
    return new_params, new_state


def global_norm(grads: dict[str, np.ndarray], names: list[str] | None = None) -> float:
    """Норма по именам; отсутствующий градиент считается нулевым."""
    names = list(grads) if names is None else names
    total = 0.0
    for name in names:
        if name not in grads:
            continue
        g = grads[name].astype(np.float64)
        total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float,
                   names: list[str] | None = None) -> tuple[dict[str, np.ndarray], float]:
    """Масштабирует градиенты, если их общая норма больше max_norm."""
    norm = global_norm(grads, names)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    factor = max_norm / (norm + 1e-6)
    names = list(grads) if names is None else names
    clipped = dict(grads)
    for name in names:
        if name not in grads:
            continue
        clipped[name] = (grads[name] * factor).astype(grads[name].dtype)
    return clipped, norm

import numpy as np
from numpy.typing import NDArray

from src.errors import ContractViolation, NumericFault

# Тензор - плотный массив float32 в row-major порядке.
Tensor = NDArray[np.float32]

DTYPE = np.float32


def as_tensor(data, shape: tuple[int, ...] | list[int] | None = None) -> Tensor:
    """
    Создаёт тензор из плоских данных (или вложенных списков).
    Если передан shape, длина данных обязана совпадать с произведением размеров.
    """
    array = np.asarray(data, dtype=DTYPE)
    if shape is None:
        return array
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ContractViolation(f"Размеры тензора должны быть положительными: {shape}")
    expected = int(np.prod(shape)) if shape else 1
    if array.size != expected:
        raise ContractViolation(
            f"Длина данных {array.size} не совпадает с произведением формы "
            f"{shape} = {expected}"
        )
    return array.reshape(shape)


def check_finite(array: np.ndarray, where: str = "",
                 node_id: int | None = None) -> None:
    """Бросает NumericFault, если в массиве есть NaN или Inf."""
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericFault(
            f"Обнаружены нечисловые значения ({bad} шт.) {where}".strip(),
            node_id=node_id
        )


def require_shape(array: np.ndarray, shape: tuple, name: str) -> None:
    """Проверка формы; None в shape означает любой размер по оси."""
    if array.ndim != len(shape) or any(
        s is not None and a != s for a, s in zip(array.shape, shape)
    ):
        raise ContractViolation(
            f"{name}: ожидалась форма {shape}, получено {array.shape}"
        )

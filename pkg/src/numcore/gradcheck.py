from typing import Callable

import numpy as np

from src.errors import ContractViolation, NumericFault
from src.numcore.graph import Graph, Node, backward
from src.numcore.rng import make_rng

# f(graph, params) -> скалярный узел потерь
LossFn = Callable[[Graph, dict[str, np.ndarray]], Node]
# f(graph, params) -> {имя цели: скалярный узел}
MultiLossFn = Callable[[Graph, dict[str, np.ndarray]], dict[str, Node]]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def _evaluate(f: MultiLossFn, params: dict[str, np.ndarray], dtype) -> dict[str, float]:
    graph = Graph(dtype=dtype)
    values = {key: node.item() for key, node in f(graph, params).items()}
    if not all(np.isfinite(v) for v in values.values()):
        raise NumericFault("Нечисловое значение функции в возмущённой точке")
    return values


def grad_check_many(
    f: MultiLossFn,
    params: dict[str, np.ndarray],
    eps: float = 1e-3,
    max_entries: int | None = None,
    seed: int = 0,
    dtype=np.float64,
    log_callback=None
) -> dict[str, float]:
    """
    Проверка нескольких целей, которые строятся одним прямым проходом:
    каждое возмущение вычисляет все цели сразу.
    Возвращает максимальную относительную ошибку для каждой цели.
    """
    if eps <= 0:
        raise ContractViolation(f"eps должен быть положительным, получено {eps}")

    work = {name: np.array(value, dtype=dtype) for name, value in params.items()}
    graph = Graph(dtype=dtype)
    losses = f(graph, work)
    for node in losses.values():
        if not np.isfinite(node.item()):
            raise NumericFault("Нечисловое значение функции", node_id=node.index)
    analytic = {key: backward(graph, node) for key, node in losses.items()}

    rng = make_rng(seed, "gradcheck")
    worst = dict.fromkeys(losses, 0.0)
    for name, tensor in work.items():
        flat = tensor.reshape(-1)
        positions = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            positions = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        grads = {}
        for key in losses:
            grad = analytic[key].get(name)
            grads[key] = np.zeros(flat.size) if grad is None else grad.reshape(-1)

        tensor_worst = 0.0
        for pos in positions:
            original = flat[pos]
            flat[pos] = original + eps
            plus = _evaluate(f, work, dtype)
            flat[pos] = original - eps
            minus = _evaluate(f, work, dtype)
            flat[pos] = original
            for key in losses:
                numeric = (plus[key] - minus[key]) / (2.0 * eps)
                err = relative_error(float(grads[key][pos]), numeric)
                worst[key] = max(worst[key], err)
                tensor_worst = max(tensor_worst, err)

        if log_callback:
            log_callback(
                f"  {name}: проверено {len(positions)} эл., "
                f"макс. отн. ошибка {tensor_worst:.3e}",
                "debug"
            )
    return worst


def grad_check(
    f: LossFn,
    params: dict[str, np.ndarray],
    eps: float = 1e-3,
    max_entries: int | None = None,
    seed: int = 0,
    dtype=np.float64,
    log_callback=None
) -> float:
    """
    Сравнивает аналитический градиент с центральными конечными разностями.
    Возвращает максимум |a - fd| / max(1e-8, |a| + |fd|) по проверенным элементам.

    Вычисления идут в dtype (по умолчанию float64), параметры копируются.
    max_entries ограничивает число проверяемых элементов на тензор
    (выбираются детерминированно по seed); None - проверять все.
    """
    errors = grad_check_many(lambda g, p: {"loss": f(g, p)}, params, eps=eps,
                             max_entries=max_entries, seed=seed, dtype=dtype,
                             log_callback=log_callback)
    return errors["loss"]

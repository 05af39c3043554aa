"""
Граф вычислений с обратным проходом (reverse-mode).

Узлы добавляются в порядке создания, поэтому список узлов всегда является
корректным топологическим порядком: входы узла имеют меньшие индексы.
Каждый примитив хранит функцию, которая по градиенту выхода возвращает
градиенты входов (None для входов без градиента).
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.app_config import LAYER_NORM_EPS
from src.errors import ContractViolation
from src.numcore.tensor import check_finite

_GELU_K = float(np.sqrt(2.0 / np.pi))
_GELU_C = 0.044715


@dataclass(eq=False)
class Node:
    graph: "Graph"
    index: int
    value: np.ndarray
    parents: tuple[int, ...]
    backward_fn: Callable[[np.ndarray], tuple] | None
    kind: str
    param_name: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __add__(self, other):
        return self.graph.add(self, other)

    def __radd__(self, other):
        return self.graph.add(other, self)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.graph.scale(self, float(other))
        return self.graph.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __repr__(self):
        name = f" '{self.param_name}'" if self.param_name else ""
        return f"<Node #{self.index} {self.kind}{name} shape={self.shape}>"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Сворачивает градиент обратно к форме входа после broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


class Graph:
    """Лента операций. Один граф - один прямой проход."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.nodes: list[Node] = []
        self.params: dict[str, int] = {}

    def _push(self, value, parents, backward_fn, kind, param_name=None) -> Node:
        node = Node(
            graph=self,
            index=len(self.nodes),
            value=value,
            parents=tuple(p.index for p in parents),
            backward_fn=backward_fn,
            kind=kind,
            param_name=param_name,
        )
        self.nodes.append(node)
        return node

    def _lift(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise ContractViolation("Узел принадлежит другому графу")
            return x
        return self.const(x)

    # --- листья ---

    def param(self, name: str, value: np.ndarray) -> Node:
        """Обучаемый параметр. Повторный вызов с тем же именем возвращает тот же узел."""
        if name in self.params:
            return self.nodes[self.params[name]]
        node = self._push(
            np.asarray(value, dtype=self.dtype), (), None, "param", param_name=name
        )
        self.params[name] = node.index
        return node

    def const(self, value) -> Node:
        return self._push(np.asarray(value, dtype=self.dtype), (), None, "const")

    # --- поэлементные ---

    def add(self, a, b) -> Node:
        a, b = self._lift(a), self._lift(b)

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
        return self._push(a.value + b.value, (a, b), bw, "add")

    def sub(self, a, b) -> Node:
        a, b = self._lift(a), self._lift(b)

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
        return self._push(a.value - b.value, (a, b), bw, "sub")

    def mul(self, a, b) -> Node:
        a, b = self._lift(a), self._lift(b)

        def bw(g):
            return (_unbroadcast(g * b.value, a.shape),
                    _unbroadcast(g * a.value, b.shape))
        return self._push(a.value * b.value, (a, b), bw, "mul")

    def scale(self, a: Node, factor: float) -> Node:
        def bw(g):
            return (g * factor,)
        return self._push(a.value * factor, (a,), bw, "scale")

    def tanh(self, a: Node) -> Node:
        y = np.tanh(a.value)

        def bw(g):
            return (g * (1.0 - y * y),)
        return self._push(y, (a,), bw, "tanh")

    def gelu(self, a: Node) -> Node:
        x = a.value
        t = np.tanh(_GELU_K * (x + _GELU_C * x ** 3))
        y = 0.5 * x * (1.0 + t)

        def bw(g):
            dt = (1.0 - t * t) * _GELU_K * (1.0 + 3.0 * _GELU_C * x * x)
            return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)
        return self._push(y, (a,), bw, "gelu")

    def dropout(self, a: Node, p: float, rng: np.random.Generator | None) -> Node:
        if p <= 0.0 or rng is None:
            return a
        keep = (rng.random(a.shape) >= p).astype(self.dtype) / (1.0 - p)

        def bw(g):
            return (g * keep,)
        return self._push(a.value * keep, (a,), bw, "dropout")

    # --- линейная алгебра и формы ---

    def matmul(self, a, b) -> Node:
        a, b = self._lift(a), self._lift(b)

        def bw(g):
            ga = np.matmul(g, _swap_last(b.value))
            gb = np.matmul(_swap_last(a.value), g)
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
        return self._push(np.matmul(a.value, b.value), (a, b), bw, "matmul")

    def transpose(self, a: Node, axes: tuple[int, ...]) -> Node:
        inverse = tuple(int(i) for i in np.argsort(axes))

        def bw(g):
            return (np.transpose(g, inverse),)
        return self._push(np.transpose(a.value, axes), (a,), bw, "transpose")

    def reshape(self, a: Node, shape: tuple[int, ...]) -> Node:
        def bw(g):
            return (g.reshape(a.shape),)
        return self._push(a.value.reshape(shape), (a,), bw, "reshape")

    def broadcast_to(self, a: Node, shape: tuple[int, ...]) -> Node:
        def bw(g):
            return (_unbroadcast(g, a.shape),)
        value = np.array(np.broadcast_to(a.value, shape))
        return self._push(value, (a,), bw, "broadcast")

    def concat(self, nodes: list[Node], axis: int) -> Node:
        nodes = [self._lift(n) for n in nodes]
        sizes = [n.shape[axis] for n in nodes]
        splits = np.cumsum(sizes)[:-1]

        def bw(g):
            return tuple(np.split(g, splits, axis=axis))
        value = np.concatenate([n.value for n in nodes], axis=axis)
        return self._push(value, tuple(nodes), bw, "concat")

    def index(self, a: Node, idx) -> Node:
        """Выборка a[idx] (срезы и целочисленные индексы)."""
        def bw(g):
            full = np.zeros_like(a.value)
            np.add.at(full, idx, g)
            return (full,)
        return self._push(np.array(a.value[idx]), (a,), bw, "index")

    def embedding(self, table: Node, ids: np.ndarray) -> Node:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise ContractViolation(
                f"id токена вне словаря размера {table.shape[0]}"
            )

        def bw(g):
            full = np.zeros_like(table.value)
            np.add.at(full, ids, g)
            return (full,)
        return self._push(table.value[ids], (table,), bw, "embedding")

    # --- редукции ---

    def sum(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.array(np.broadcast_to(g, a.shape)),)
        value = np.asarray(a.value.sum(axis=axis, keepdims=keepdims), dtype=self.dtype)
        return self._push(value, (a,), bw, "sum")

    def mean(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        total = self.sum(a, axis=axis, keepdims=keepdims)
        count = a.value.size // max(total.value.size, 1)
        return self.scale(total, 1.0 / count)

    # --- нормировки ---

    def softmax(self, a: Node, axis: int = -1) -> Node:
        shifted = a.value - a.value.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)

        def bw(g):
            return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
        return self._push(y, (a,), bw, "softmax")

    def logsumexp(self, a: Node, axis: int = -1, where: np.ndarray | None = None) -> Node:
        """log Σ exp(a) по оси; where - булева маска учитываемых элементов."""
        x = a.value
        mask = np.ones(x.shape, dtype=bool) if where is None else np.broadcast_to(where, x.shape)
        if not np.all(mask.any(axis=axis)):
            raise ContractViolation("logsumexp: пустое множество слагаемых")
        masked = np.where(mask, x, -np.inf)
        m = masked.max(axis=axis, keepdims=True)
        s = np.where(mask, np.exp(x - m), 0.0).sum(axis=axis, keepdims=True)
        y = (m + np.log(s)).astype(self.dtype)

        def bw(g):
            p = np.where(mask, np.exp(x - y), 0.0).astype(self.dtype)
            return (np.expand_dims(g, axis) * p,)
        return self._push(np.squeeze(y, axis=axis), (a,), bw, "logsumexp")

    def layer_norm(self, x: Node, gamma: Node, beta: Node,
                   eps: float = LAYER_NORM_EPS) -> Node:
        v = x.value
        mu = v.mean(axis=-1, keepdims=True)
        var = ((v - mu) ** 2).mean(axis=-1, keepdims=True)
        rstd = 1.0 / np.sqrt(var + eps)
        xhat = (v - mu) * rstd

        def bw(g):
            g_beta = _unbroadcast(g, beta.shape)
            g_gamma = _unbroadcast(g * xhat, gamma.shape)
            gx_hat = g * gamma.value
            gx = rstd * (
                gx_hat
                - gx_hat.mean(axis=-1, keepdims=True)
                - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
            )
            return gx, g_gamma, g_beta
        y = xhat * gamma.value + beta.value
        return self._push(y, (x, gamma, beta), bw, "layer_norm")

    def l2_normalize(self, a: Node, axis: int = -1) -> Node:
        norm = np.sqrt((a.value * a.value).sum(axis=axis, keepdims=True))
        if np.any(norm == 0):
            raise ContractViolation("Вектор нулевой нормы не нормируется")
        y = a.value / norm

        def bw(g):
            return ((g - y * (g * y).sum(axis=axis, keepdims=True)) / norm,)
        return self._push(y, (a,), bw, "l2_normalize")

    # --- потери ---

    def cross_entropy(self, logits: Node, targets: np.ndarray, mask: np.ndarray,
                      reduction: str = "mean") -> Node:
        """
        Сумма (или среднее по маске) -log softmax(logits)[target].
        logits: (..., V); targets, mask: (...).
        """
        x = logits.value
        targets = np.asarray(targets, dtype=np.int64)
        mask = np.asarray(mask, dtype=self.dtype)
        if targets.shape != x.shape[:-1] or mask.shape != x.shape[:-1]:
            raise ContractViolation(
                f"cross_entropy: формы logits {x.shape}, targets {targets.shape}, "
                f"mask {mask.shape} не согласованы"
            )
        denom = float(mask.sum()) if reduction == "mean" else 1.0
        if denom <= 0:
            raise ContractViolation("cross_entropy: маска не выбирает ни одной позиции")
        m = x.max(axis=-1, keepdims=True)
        lse = m + np.log(np.exp(x - m).sum(axis=-1, keepdims=True))
        picked = np.take_along_axis(x, targets[..., None], axis=-1)
        nll = (lse - picked)[..., 0]
        value = np.asarray((nll * mask).sum() / denom, dtype=self.dtype)

        def bw(g):
            p = np.exp(x - lse)
            np.put_along_axis(
                p, targets[..., None],
                np.take_along_axis(p, targets[..., None], axis=-1) - 1.0, axis=-1
            )
            return (p * (g * mask / denom)[..., None],)
        return self._push(value, (logits,), bw, "cross_entropy")


def backward(graph: Graph, loss_node: Node,
             check_values: bool = True) -> dict[str, np.ndarray]:
    """
    Обратный проход от скалярного узла потерь.
    Возвращает градиенты всех параметров графа; недостижимые получают нули.
    """
    if loss_node.graph is not graph:
        raise ContractViolation("Узел потерь принадлежит другому графу")
    if loss_node.value.size != 1:
        raise ContractViolation(
            f"backward ожидает скалярные потери, получена форма {loss_node.shape}"
        )

    grads: list[np.ndarray | None] = [None] * (loss_node.index + 1)
    grads[loss_node.index] = np.ones_like(loss_node.value)

    for i in range(loss_node.index, -1, -1):
        g = grads[i]
        if g is None:
            continue
        node = graph.nodes[i]
        if check_values:
            check_finite(node.value, f"в значении узла {node.kind}", node_id=i)
            check_finite(g, f"в градиенте узла {node.kind}", node_id=i)
        if node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None:
                continue
            expected = graph.nodes[parent].shape
            if pg.shape != expected:
                raise ContractViolation(
                    f"Градиент узла #{parent} формы {pg.shape}, ожидалась {expected}"
                )
            grads[parent] = pg if grads[parent] is None else grads[parent] + pg

    result = {}
    for name, idx in graph.params.items():
        g = grads[idx] if idx < len(grads) else None
        if g is None:
            g = np.zeros_like(graph.nodes[idx].value)
        result[name] = np.asarray(g, dtype=graph.dtype)
    return result

"""Проекционная голова и представление предложения для контрастивной цели."""
import numpy as np

from src.errors import ContractViolation
from src.model.config import ModelConfig
from src.model.layers import init_linear, linear
from src.numcore.graph import Graph, Node

PREFIX = "head."


def init_head(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return init_linear(rng, f"{PREFIX}proj", cfg.d_model, cfg.d_v, cfg.init_std)


def pooling_weights(mask: np.ndarray, mode: str = "mean") -> np.ndarray:
    """
    Веса пулинга (B, S) по маске позиций цели.
    mean - равные веса по маске, last - единица на последней позиции маски.
    """
    mask = np.asarray(mask, dtype=np.float32)
    counts = mask.sum(axis=1)
    if np.any(counts <= 0):
        raise ContractViolation("Маска цели не выбирает ни одной позиции")
    if mode == "mean":
        return mask / counts[:, None]
    weights = np.zeros_like(mask)
    last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1] > 0, axis=1)
    weights[np.arange(mask.shape[0]), last] = 1.0
    return weights


def sentence_rep_graph(g: Graph, params: dict[str, np.ndarray], hidden: Node,
                       target_mask: np.ndarray, mode: str = "mean") -> Node:
    """hidden (B, S, d), маска (B, S) -> t_hat (B, d_v)."""
    batch, _, d_model = hidden.shape
    weights = pooling_weights(target_mask, mode)[:, None, :]
    pooled = g.reshape(g.matmul(g.const(weights), hidden), (batch, d_model))
    return linear(g, params, f"{PREFIX}proj", pooled)


def sentence_rep(hidden: np.ndarray, target_mask: np.ndarray,
                 params: dict[str, np.ndarray], cfg: ModelConfig) -> np.ndarray:
    """
    Представление предложения без графа.
    hidden (S, d) с маской (S,) -> (d_v,); батчевые формы тоже принимаются.
    Нормировка не выполняется, она входит в косинусное сходство.
    """
    hidden = np.asarray(hidden, dtype=np.float32)
    target_mask = np.asarray(target_mask)
    single = hidden.ndim == 2
    if single:
        hidden, target_mask = hidden[None], target_mask[None]
    if target_mask.shape != hidden.shape[:2]:
        raise ContractViolation(
            f"Маска {target_mask.shape} не согласована со скрытыми состояниями {hidden.shape}"
        )
    g = Graph()
    rep = sentence_rep_graph(g, params, g.const(hidden), target_mask, cfg.pooling).value
    return rep[0] if single else rep

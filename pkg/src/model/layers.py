"""
Строительные блоки трансформера поверх графа numcore.

Параметры хранятся в плоском словаре name -> ndarray; блок с именем
"lm.block0" владеет ключами "lm.block0.attn.qkv.weight" и т.д.
"""
import numpy as np

from src.app_config import ATTENTION_MASK_VALUE
from src.numcore.graph import Graph, Node


def init_linear(rng: np.random.Generator, name: str, d_in: int, d_out: int,
                std: float) -> dict[str, np.ndarray]:
    return {
        f"{name}.weight": rng.normal(0.0, std, size=(d_in, d_out)).astype(np.float32),
        f"{name}.bias": np.zeros(d_out, dtype=np.float32),
    }


def init_layer_norm(name: str, dim: int) -> dict[str, np.ndarray]:
    return {
        f"{name}.gamma": np.ones(dim, dtype=np.float32),
        f"{name}.beta": np.zeros(dim, dtype=np.float32),
    }


def init_block(rng: np.random.Generator, name: str, d_model: int, d_ff: int,
               std: float) -> dict[str, np.ndarray]:
    params = {}
    params.update(init_layer_norm(f"{name}.ln1", d_model))
    params.update(init_linear(rng, f"{name}.attn.qkv", d_model, 3 * d_model, std))
    params.update(init_linear(rng, f"{name}.attn.out", d_model, d_model, std))
    params.update(init_layer_norm(f"{name}.ln2", d_model))
    params.update(init_linear(rng, f"{name}.mlp.fc", d_model, d_ff, std))
    params.update(init_linear(rng, f"{name}.mlp.proj", d_ff, d_model, std))
    return params


def linear(g: Graph, params: dict[str, np.ndarray], name: str, x: Node) -> Node:
    weight = g.param(f"{name}.weight", params[f"{name}.weight"])
    bias = g.param(f"{name}.bias", params[f"{name}.bias"])
    return g.matmul(x, weight) + bias


def layer_norm(g: Graph, params: dict[str, np.ndarray], name: str, x: Node) -> Node:
    gamma = g.param(f"{name}.gamma", params[f"{name}.gamma"])
    beta = g.param(f"{name}.beta", params[f"{name}.beta"])
    return g.layer_norm(x, gamma, beta)


def causal_mask(length: int) -> np.ndarray:
    """Аддитивная маска (S, S): позиция i не видит позиции j > i."""
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(upper, ATTENTION_MASK_VALUE, 0.0)


def attention(g: Graph, params: dict[str, np.ndarray], name: str, x: Node,
              n_heads: int, causal: bool) -> Node:
    batch, length, d_model = x.shape
    head_dim = d_model // n_heads
    qkv = linear(g, params, f"{name}.qkv", x)

    def heads(part: int) -> Node:
        chunk = g.index(qkv, (slice(None), slice(None),
                              slice(part * d_model, (part + 1) * d_model)))
        chunk = g.reshape(chunk, (batch, length, n_heads, head_dim))
        return g.transpose(chunk, (0, 2, 1, 3))

    q, k, v = heads(0), heads(1), heads(2)
    scores = g.scale(g.matmul(q, g.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(head_dim))
    if causal:
        scores = scores + g.const(causal_mask(length))
    weights = g.softmax(scores, axis=-1)
    mixed = g.transpose(g.matmul(weights, v), (0, 2, 1, 3))
    mixed = g.reshape(mixed, (batch, length, d_model))
    return linear(g, params, f"{name}.out", mixed)


def feed_forward(g: Graph, params: dict[str, np.ndarray], name: str, x: Node) -> Node:
    hidden = g.gelu(linear(g, params, f"{name}.fc", x))
    return linear(g, params, f"{name}.proj", hidden)


def transformer_block(g: Graph, params: dict[str, np.ndarray], name: str, x: Node,
                      n_heads: int, causal: bool, dropout: float = 0.0,
                      rng: np.random.Generator | None = None) -> Node:
    """Блок с pre-LN: x + attn(ln1(x)), затем x + mlp(ln2(x))."""
    attn_out = attention(g, params, f"{name}.attn",
                         layer_norm(g, params, f"{name}.ln1", x), n_heads, causal)
    x = x + g.dropout(attn_out, dropout, rng)
    mlp_out = feed_forward(g, params, f"{name}.mlp",
                           layer_norm(g, params, f"{name}.ln2", x))
    return x + g.dropout(mlp_out, dropout, rng)

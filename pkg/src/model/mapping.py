"""
Отображающая сеть: вектор признаков d_v -> визуальный префикс (l, d_model).

mlp:          d_v -> hidden -> ... -> l*d_model, tanh между слоями;
transformer:  v линейно разворачивается в l слотов, к ним дописываются
              l обучаемых константных токенов, затем mapping_layers
              блоков самовнимания без маски; берутся первые l выходов.
"""
import numpy as np

from src.errors import ContractViolation
from src.model.config import ModelConfig
from src.model.layers import init_block, init_linear, linear, transformer_block
from src.numcore.graph import Graph, Node

PREFIX = "map."


def init_mapping(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    if not cfg.has_prefix:
        return {}
    l, d = cfg.prefix_len, cfg.d_model
    params = {}
    if cfg.mapping_variant == "mlp":
        sizes = [cfg.d_v] + [cfg.mlp_hidden] * (cfg.mapping_layers - 1) + [l * d]
        for i, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            params.update(init_linear(rng, f"{PREFIX}fc{i}", d_in, d_out, cfg.init_std))
        return params

    params.update(init_linear(rng, f"{PREFIX}slots", cfg.d_v, l * d, cfg.init_std))
    params[f"{PREFIX}const"] = rng.normal(0.0, cfg.init_std, size=(l, d)).astype(np.float32)
    for i in range(cfg.mapping_layers):
        params.update(init_block(rng, f"{PREFIX}block{i}", d, cfg.d_ff, cfg.init_std))
    return params


def mapping_forward(g: Graph, params: dict[str, np.ndarray], cfg: ModelConfig,
                    features: Node) -> Node:
    """features: (B, d_v) -> префикс (B, l, d_model)."""
    batch = features.shape[0]
    l, d = cfg.prefix_len, cfg.d_model

    if cfg.mapping_variant == "mlp":
        x = features
        for i in range(cfg.mapping_layers):
            x = linear(g, params, f"{PREFIX}fc{i}", x)
            if i < cfg.mapping_layers - 1:
                x = g.tanh(x)
        return g.reshape(x, (batch, l, d))

    slots = g.reshape(linear(g, params, f"{PREFIX}slots", features), (batch, l, d))
    const = g.param(f"{PREFIX}const", params[f"{PREFIX}const"])
    const = g.broadcast_to(g.reshape(const, (1, l, d)), (batch, l, d))
    x = g.concat([slots, const], axis=1)
    for i in range(cfg.mapping_layers):
        x = transformer_block(g, params, f"{PREFIX}block{i}", x, cfg.n_heads, causal=False)
    return g.index(x, (slice(None), slice(0, l), slice(None)))


def map_features(params: dict[str, np.ndarray], cfg: ModelConfig,
                 v: np.ndarray) -> np.ndarray:
    """Префикс для одного вектора (d_v,) -> (l, d_model) или батча (B, d_v) -> (B, l, d_model)."""
    v = np.asarray(v, dtype=np.float32)
    single = v.ndim == 1
    batch = v[None, :] if single else v
    if batch.ndim != 2 or batch.shape[1] != cfg.d_v:
        raise ContractViolation(
            f"Размерность признака {v.shape} не совпадает с d_v={cfg.d_v}"
        )
    if not np.all(np.isfinite(batch)):
        raise ContractViolation("Вектор признаков содержит NaN/Inf")
    if not cfg.has_prefix:
        prefix = np.zeros((batch.shape[0], 0, cfg.d_model), dtype=np.float32)
    else:
        g = Graph()
        prefix = mapping_forward(g, params, cfg, g.const(batch)).value
    return prefix[0] if single else prefix

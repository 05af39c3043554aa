import numpy as np

from src.model.config import ModelConfig
from src.model.layers import init_block, init_layer_norm, layer_norm, transformer_block
from src.numcore.graph import Graph, Node

PREFIX = "lm."


def init_decoder(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d = cfg.d_model
    params = {
        f"{PREFIX}tok_emb": rng.normal(0.0, cfg.init_std, size=(cfg.vocab_size, d)).astype(np.float32),
        # позиции 0..max_positions включительно
        f"{PREFIX}pos_emb": rng.normal(0.0, cfg.init_std, size=(cfg.max_positions + 1, d)).astype(np.float32),
    }
    for i in range(cfg.n_layers):
        params.update(init_block(rng, f"{PREFIX}block{i}", d, cfg.d_ff, cfg.init_std))
    params.update(init_layer_norm(f"{PREFIX}ln_f", d))
    return params


def embed_tokens(g: Graph, params: dict[str, np.ndarray], ids: np.ndarray) -> Node:
    table = g.param(f"{PREFIX}tok_emb", params[f"{PREFIX}tok_emb"])
    return g.embedding(table, ids)


def decoder_forward(g: Graph, params: dict[str, np.ndarray], cfg: ModelConfig,
                    inputs: Node, rng: np.random.Generator | None = None
                    ) -> tuple[Node, Node]:
    """
    inputs: (B, S, d_model) - уже собранные эмбеддинги [префикс; текст].
    Возвращает (logits (B, S, V), скрытые состояния последнего слоя (B, S, d)).
    """
    length = inputs.shape[1]
    pos_table = g.param(f"{PREFIX}pos_emb", params[f"{PREFIX}pos_emb"])
    x = inputs + g.index(pos_table, slice(0, length))
    x = g.dropout(x, cfg.dropout, rng)
    for i in range(cfg.n_layers):
        x = transformer_block(g, params, f"{PREFIX}block{i}", x, cfg.n_heads,
                              causal=True, dropout=cfg.dropout, rng=rng)
    hidden = layer_norm(g, params, f"{PREFIX}ln_f", x)
    # выходная проекция связана с таблицей эмбеддингов
    table = g.param(f"{PREFIX}tok_emb", params[f"{PREFIX}tok_emb"])
    logits = g.matmul(hidden, g.transpose(table, (1, 0)))
    return logits, hidden

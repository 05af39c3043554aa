"""
Визуально-управляемая языковая модель: отображающая сеть + декодер + голова.

Вход декодера для примера: [c_1..c_l, BOS, x_1..x_m, y_1..y_n],
по одной строке логитов на каждую входную позицию.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.app_config import BOS_ID
from src.errors import ContractViolation, FormatError
from src.model.config import ModelConfig
from src.model.decoder import PREFIX as LM_PREFIX
from src.model.decoder import decoder_forward, embed_tokens, init_decoder
from src.model.mapping import PREFIX as MAP_PREFIX
from src.model.mapping import init_mapping, map_features, mapping_forward
from src.model.projection import PREFIX as HEAD_PREFIX
from src.model.projection import init_head, sentence_rep, sentence_rep_graph
from src.numcore.checkpoint import load_checkpoint, save_checkpoint
from src.numcore.graph import Graph, Node
from src.numcore.rng import make_rng
from src.textdata.batching import Batch
from src.textdata.vocab import Vocab


@dataclass
class ForwardOutput:
    logits: Node
    hidden: Node
    prefix_len: int


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


class VisuallyGuidedLM:
    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray],
                 vocab: Vocab | None = None):
        self.cfg = cfg
        self.params = params
        self.vocab = vocab
        if vocab is not None and len(vocab) != cfg.vocab_size:
            raise ContractViolation(
                f"Размер словаря {len(vocab)} не совпадает с vocab_size={cfg.vocab_size}"
            )

    @classmethod
    def init(cls, cfg: ModelConfig, seed: int, vocab: Vocab | None = None) -> "VisuallyGuidedLM":
        # каждая группа получает свой поток, чтобы l=0 не сдвигал инициализацию LM
        params = {}
        params.update(init_decoder(cfg, make_rng(seed, "init", 0)))
        params.update(init_mapping(cfg, make_rng(seed, "init", 1)))
        params.update(init_head(cfg, make_rng(seed, "init", 2)))
        return cls(cfg, params, vocab)

    # --- группы параметров ---

    @property
    def lm_names(self) -> list[str]:
        """Декодер и проекционная голова (флаг tune_lm)."""
        return [n for n in self.params if n.startswith((LM_PREFIX, HEAD_PREFIX))]

    @property
    def map_names(self) -> list[str]:
        return [n for n in self.params if n.startswith(MAP_PREFIX)]

    def group(self, prefixes: tuple[str, ...]) -> dict[str, np.ndarray]:
        return {n: v for n, v in self.params.items() if n.startswith(prefixes)}

    def with_params(self, params: dict[str, np.ndarray]) -> "VisuallyGuidedLM":
        return VisuallyGuidedLM(self.cfg, params, self.vocab)

    def copy(self) -> "VisuallyGuidedLM":
        return self.with_params({n: v.copy() for n, v in self.params.items()})

    # --- прямой проход ---

    def check_batch(self, batch: Batch) -> None:
        if batch.features.shape[1] != self.cfg.d_v:
            raise ContractViolation(
                f"Размерность признаков {batch.features.shape[1]} "
                f"не совпадает с d_v={self.cfg.d_v}"
            )
        for example_id, length in zip(batch.ids, batch.lengths):
            # length = 1 + m + n
            self.cfg.check_length(0, int(length) - 1, example_id=example_id)

    def embed(self, g: Graph, token_ids: np.ndarray, features: np.ndarray,
              params: dict[str, np.ndarray] | None = None) -> Node:
        """Эмбеддинги [префикс; текст] формы (B, l+S, d)."""
        params = self.params if params is None else params
        text = embed_tokens(g, params, token_ids)
        if not self.cfg.has_prefix:
            return text
        prefix = mapping_forward(g, params, self.cfg, g.const(features))
        return g.concat([prefix, text], axis=1)

    def forward(self, g: Graph, batch: Batch, rng: np.random.Generator | None = None,
                params: dict[str, np.ndarray] | None = None) -> ForwardOutput:
        params = self.params if params is None else params
        self.check_batch(batch)
        inputs = self.embed(g, batch.token_ids, batch.features, params)
        logits, hidden = decoder_forward(g, params, self.cfg, inputs, rng)
        return ForwardOutput(logits=logits, hidden=hidden, prefix_len=self.cfg.prefix_len)

    def sentence_rep_node(self, g: Graph, out: ForwardOutput, batch: Batch,
                          params: dict[str, np.ndarray] | None = None) -> Node:
        params = self.params if params is None else params
        mask = batch.with_prefix(batch.target_mask, out.prefix_len)
        return sentence_rep_graph(g, params, out.hidden, mask, self.cfg.pooling)

    # --- операции над отдельными примерами ---

    def map_features(self, v: np.ndarray) -> np.ndarray:
        return map_features(self.params, self.cfg, v)

    def lm_forward(self, prefix: np.ndarray | None, context_ids, target_in,
                   example_id: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Логиты (l+1+m+n, V) и скрытые состояния (l+1+m+n, d) для одного примера.
        prefix: (l, d_model) или None при l=0.
        """
        context_ids = list(context_ids)
        target_in = list(target_in)
        self.cfg.check_length(len(context_ids), len(target_in), example_id)
        ids = np.array([[BOS_ID, *context_ids, *target_in]], dtype=np.int64)

        g = Graph()
        inputs = embed_tokens(g, self.params, ids)
        if self.cfg.has_prefix:
            if prefix is None or np.shape(prefix) != (self.cfg.prefix_len, self.cfg.d_model):
                raise ContractViolation(
                    f"Ожидался префикс ({self.cfg.prefix_len}, {self.cfg.d_model}), "
                    f"получено {None if prefix is None else np.shape(prefix)}"
                )
            inputs = g.concat([g.const(np.asarray(prefix)[None]), inputs], axis=1)
        logits, hidden = decoder_forward(g, self.params, self.cfg, inputs)
        return logits.value[0], hidden.value[0]

    def sentence_rep(self, hidden: np.ndarray, target_mask: np.ndarray) -> np.ndarray:
        return sentence_rep(hidden, target_mask, self.params, self.cfg)

    def next_token_logprobs(self, prefix: np.ndarray | None, context_ids,
                            sequences: list[list[int]]) -> np.ndarray:
        """
        Лог-вероятности следующего токена (k, V) для k продолжений одинаковой длины.
        """
        if not sequences:
            return np.zeros((0, self.cfg.vocab_size), dtype=np.float32)
        length = len(sequences[0])
        if any(len(s) != length for s in sequences):
            raise ContractViolation("Продолжения в одном вызове должны быть одной длины")
        context_ids = list(context_ids)
        self.cfg.check_length(len(context_ids), length)
        ids = np.array([[BOS_ID, *context_ids, *s] for s in sequences], dtype=np.int64)

        g = Graph()
        inputs = embed_tokens(g, self.params, ids)
        if self.cfg.has_prefix:
            c = np.broadcast_to(np.asarray(prefix, dtype=np.float32)[None],
                                (len(sequences), self.cfg.prefix_len, self.cfg.d_model))
            inputs = g.concat([g.const(c), inputs], axis=1)
        logits, _ = decoder_forward(g, self.params, self.cfg, inputs)
        return log_softmax(logits.value[:, -1, :].astype(np.float64))

    # --- чекпоинты ---

    def header(self, extra: dict[str, str] | None = None) -> dict[str, str]:
        header = self.cfg.to_header()
        if self.vocab is not None:
            header["vocab"] = json.dumps(
                {"mode": self.vocab.mode, "tokens": self.vocab.tokens}, ensure_ascii=True
            )
        header.update(extra or {})
        return header

    def save(self, path: Path, extra: dict[str, str] | None = None) -> Path:
        return save_checkpoint(path, self.params, self.header(extra))

    @classmethod
    def load(cls, path: Path) -> tuple["VisuallyGuidedLM", dict[str, str]]:
        tensors, header = load_checkpoint(path)
        cfg = ModelConfig.from_header(header)
        vocab = None
        if "vocab" in header:
            try:
                data = json.loads(header["vocab"])
                vocab = Vocab(tokens=list(data["tokens"]), mode=data["mode"])
            except (ValueError, KeyError) as e:
                raise FormatError(f"{Path(path).name}: повреждён словарь в заголовке ({e})")
        expected = set(cls.init(cfg, 0).params)
        if set(tensors) != expected:
            missing = sorted(expected - set(tensors))
            extra = sorted(set(tensors) - expected)
            raise FormatError(
                f"{Path(path).name}: набор тензоров не совпадает с конфигурацией "
                f"(нет: {missing[:3]}, лишние: {extra[:3]})"
            )
        return cls(cfg, tensors, vocab), header

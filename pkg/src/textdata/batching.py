from dataclasses import dataclass

import numpy as np

from src.app_config import BOS_ID, PAD_ID
from src.errors import ContractViolation
from src.textdata.corpus import Example


@dataclass
class Batch:
    """
    Текстовая часть входа LM: [BOS, контекст, цель], дополненная PAD справа.
    Все маски имеют форму (B, S) и относятся к текстовым позициям
    (визуальный префикс добавляется моделью слева).

    loss_mask    - строки, предсказывающие токены цели (next_ids[b, s] - цель);
    target_mask  - позиции, в которых стоят токены цели;
    context_mask - позиции BOS и контекста;
    pad_mask     - позиции PAD.
    """
    ids: list[str]
    token_ids: np.ndarray
    next_ids: np.ndarray
    loss_mask: np.ndarray
    target_mask: np.ndarray
    context_mask: np.ndarray
    pad_mask: np.ndarray
    features: np.ndarray
    lengths: np.ndarray

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def width(self) -> int:
        return self.token_ids.shape[1]

    def with_prefix(self, mask: np.ndarray, prefix_len: int) -> np.ndarray:
        """Маска на всю последовательность [префикс; текст] (нули на префиксе)."""
        pad = np.zeros((mask.shape[0], prefix_len), dtype=mask.dtype)
        return np.concatenate([pad, mask], axis=1)


def collate(examples: list[Example]) -> Batch:
    if not examples:
        raise ContractViolation("Пустой батч")
    lengths = np.array([1 + ex.m + ex.n for ex in examples], dtype=np.int64)
    width = int(lengths.max())
    size = len(examples)

    token_ids = np.full((size, width), PAD_ID, dtype=np.int64)
    next_ids = np.full((size, width), PAD_ID, dtype=np.int64)
    loss_mask = np.zeros((size, width), dtype=np.float32)
    target_mask = np.zeros((size, width), dtype=np.float32)
    context_mask = np.zeros((size, width), dtype=np.float32)
    pad_mask = np.ones((size, width), dtype=np.float32)

    for b, ex in enumerate(examples):
        seq = [BOS_ID, *ex.context_ids, *ex.target_ids]
        length = len(seq)
        token_ids[b, :length] = seq
        next_ids[b, :length - 1] = seq[1:]
        pad_mask[b, :length] = 0.0
        context_mask[b, :1 + ex.m] = 1.0
        target_mask[b, 1 + ex.m:length] = 1.0
        # строка позиции s предсказывает токен s+1
        loss_mask[b, ex.m:length - 1] = 1.0

    return Batch(
        ids=[ex.id for ex in examples],
        token_ids=token_ids,
        next_ids=next_ids,
        loss_mask=loss_mask,
        target_mask=target_mask,
        context_mask=context_mask,
        pad_mask=pad_mask,
        features=np.stack([ex.feature for ex in examples]).astype(np.float32),
        lengths=lengths,
    )


def make_batches(examples: list[Example], batch_size: int, seed: int | None,
                 drop_last: bool = False) -> list[Batch]:
    """
    Разбивает эпоху на батчи. seed задаёт перемешивание (None - исходный порядок).
    """
    if batch_size < 1:
        raise ContractViolation(f"batch_size должен быть >= 1: {batch_size}")
    order = np.arange(len(examples))
    if seed is not None:
        order = np.random.Generator(np.random.Philox(seed)).permutation(len(examples))

    batches = []
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        if drop_last and len(chunk) < batch_size:
            break
        batches.append(collate([examples[i] for i in chunk]))
    return batches

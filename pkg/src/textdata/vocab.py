import ast
from dataclasses import dataclass, field
from pathlib import Path

from src.app_config import (
    BOS_ID, EOS_ID, PAD_ID, RESERVED_TOKENS, UNK_ID, VOCAB_MODES
)
from src.errors import ContractViolation


def tokenize(text: str, mode: str = "word", lowercase: bool = True) -> list[str]:
    """Разбивает текст на токены: по пробелам (word) или посимвольно (char)."""
    if mode not in VOCAB_MODES:
        raise ContractViolation(f"Неизвестный режим словаря: {mode}")
    if lowercase:
        text = text.lower()
    if mode == "word":
        return text.split()
    return list(text.strip())


def detokenize(tokens: list[str], mode: str = "word") -> str:
    return " ".join(tokens) if mode == "word" else "".join(tokens)


@dataclass
class Vocab:
    """Биекция токен <-> id. Первые четыре id зарезервированы."""
    tokens: list[str] = field(default_factory=lambda: list(RESERVED_TOKENS))
    mode: str = "word"

    def __post_init__(self):
        if tuple(self.tokens[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ContractViolation("Зарезервированные токены словаря повреждены")
        if len(set(self.tokens)) != len(self.tokens):
            raise ContractViolation("Токены словаря не уникальны")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts, mode: str = "word", lowercase: bool = True) -> "Vocab":
        seen = set()
        for text in texts:
            seen.update(tokenize(text, mode, lowercase))
        seen.difference_update(RESERVED_TOKENS)
        vocab = cls(tokens=list(RESERVED_TOKENS) + sorted(seen), mode=mode)
        if len(vocab) < 5:
            raise ContractViolation(
                "Словарь пуст: в обучающем корпусе нет ни одного токена"
            )
        return vocab

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.id_of(tok) for tok in tokens]

    def decode(self, ids, strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip_special and i in (PAD_ID, BOS_ID, EOS_ID):
                continue
            out.append(self.tokens[i])
        return out

    def encode_text(self, text: str, lowercase: bool = True) -> list[int]:
        return self.encode(tokenize(text, self.mode, lowercase))

    def decode_text(self, ids) -> str:
        return detokenize(self.decode(ids), self.mode)

    def save(self, path: Path) -> None:
        # Первая строка - режим, далее по одному токену (repr для пробела в char)
        lines = [f"mode={self.mode}"] + [repr(tok) for tok in self.tokens]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("mode="):
            raise ContractViolation(f"Файл словаря {path} повреждён")
        mode = lines[0].split("=", 1)[1]
        tokens = [ast.literal_eval(line) for line in lines[1:] if line]
        return cls(tokens=tokens, mode=mode)

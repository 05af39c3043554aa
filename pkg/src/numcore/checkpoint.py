"""
Бинарный формат чекпоинта.

magic "INLGCKPT" | u16 версия | u32 число тензоров | u32 длина заголовка |
заголовок (UTF-8, строки key=value) | тензоры:
u16 длина имени | имя UTF-8 | u8 ранг | ранг x u32 размеры | float32 LE row-major.
"""
import struct
from pathlib import Path

import numpy as np

from src.app_config import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from src.errors import FormatError


def format_header(header: dict[str, str]) -> str:
    return "".join(f"{key}={value}\n" for key, value in header.items())


def parse_header(text: str) -> dict[str, str]:
    header = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"Некорректная строка заголовка чекпоинта: {line!r}")
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
    return header


def encode_checkpoint(tensors: dict[str, np.ndarray], header: dict[str, str]) -> bytes:
    header_bytes = format_header(header).encode("utf-8")
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<HII", CHECKPOINT_VERSION, len(tensors), len(header_bytes)),
        header_bytes,
    ]
    for name, value in tensors.items():
        name_bytes = name.encode("utf-8")
        # скаляр сохраняется с рангом 0, tobytes сам переводит в C-порядок
        array = np.asarray(value, dtype="<f4")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(array.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise FormatError(f"Файл {self.source} обрезан (смещение {self.pos})")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, source: str = "<bytes>"
                      ) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    reader = _Reader(data, source)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise FormatError(f"{source}: неверная сигнатура чекпоинта")
    version, count, header_len = reader.unpack("<HII")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{source}: неизвестная версия чекпоинта {version}")
    try:
        header = parse_header(reader.take(header_len).decode("utf-8"))
    except UnicodeDecodeError as e:
        raise FormatError(f"{source}: заголовок не в UTF-8 ({e})")

    tensors = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("<B")
        dims = reader.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(dims)) if dims else 1
        payload = reader.take(4 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if reader.pos != len(data):
        raise FormatError(f"{source}: лишние байты после последнего тензора")
    return tensors, header


def save_checkpoint(path: Path, tensors: dict[str, np.ndarray],
                    header: dict[str, str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    tmp_path.write_bytes(encode_checkpoint(tensors, header))
    tmp_path.replace(path)
    return path


def load_checkpoint(path: Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Чекпоинт не найден: {path}")
    return decode_checkpoint(path.read_bytes(), source=path.name)

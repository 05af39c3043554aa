"""
Файл визуальных признаков.

magic "INLGFEAT" | u16 версия=1 | u32 число строк | u32 размерность |
для каждой строки: u16 длина id | id UTF-8 | dim x float32 LE.
"""
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.app_config import FEATURES_MAGIC, FEATURES_VERSION
from src.errors import ContractViolation, FormatError


@dataclass
class FeatureTable:
    dim: int
    rows: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise ContractViolation(f"Размерность признаков должна быть > 0: {self.dim}")
        for feature_id, row in self.rows.items():
            self._check_row(feature_id, row)

    def _check_row(self, feature_id: str, row: np.ndarray) -> None:
        if np.shape(row) != (self.dim,):
            raise ContractViolation(
                f"Признак '{feature_id}' имеет форму {np.shape(row)}, ожидалось ({self.dim},)"
            )
        if not np.isfinite(row).all():
            raise ContractViolation(f"Признак '{feature_id}' содержит NaN или бесконечность")

    def add(self, feature_id: str, row) -> None:
        row = np.asarray(row, dtype=np.float32)
        self._check_row(feature_id, row)
        if feature_id in self.rows:
            raise ContractViolation(f"Повторный id признака: {feature_id}")
        self.rows[feature_id] = row

    def __contains__(self, feature_id: str) -> bool:
        return feature_id in self.rows

    def __getitem__(self, feature_id: str) -> np.ndarray:
        return self.rows[feature_id]

    def __len__(self) -> int:
        return len(self.rows)


def encode_features(table: FeatureTable) -> bytes:
    parts = [
        FEATURES_MAGIC,
        struct.pack("<HII", FEATURES_VERSION, len(table.rows), table.dim),
    ]
    for feature_id, row in table.rows.items():
        id_bytes = feature_id.encode("utf-8")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(np.ascontiguousarray(row, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_features(data: bytes, source: str = "<bytes>") -> FeatureTable:
    header_size = len(FEATURES_MAGIC) + struct.calcsize("<HII")
    if len(data) < header_size:
        raise FormatError(f"{source}: файл признаков обрезан (нет заголовка)")
    if data[:len(FEATURES_MAGIC)] != FEATURES_MAGIC:
        raise FormatError(f"{source}: неверная сигнатура файла признаков")
    version, count, dim = struct.unpack_from("<HII", data, len(FEATURES_MAGIC))
    if version != FEATURES_VERSION:
        raise FormatError(f"{source}: неизвестная версия файла признаков {version}")
    if dim == 0:
        raise FormatError(f"{source}: нулевая размерность признаков")

    pos = header_size
    row_bytes = 4 * dim
    table = FeatureTable(dim=dim)
    for i in range(count):
        if pos + 2 > len(data):
            raise FormatError(f"{source}: обрезана строка {i}")
        (id_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + id_len + row_bytes > len(data):
            raise FormatError(
                f"{source}: строка {i} обрезана (ожидалось {dim} значений float32)"
            )
        try:
            feature_id = data[pos:pos + id_len].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{source}: id строки {i} не в UTF-8 ({e})")
        pos += id_len
        row = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float32)
        pos += row_bytes
        if not np.isfinite(row).all():
            raise FormatError(f"{source}: строка {i} содержит NaN или бесконечность")
        if feature_id in table:
            raise FormatError(f"{source}: повторный id признака '{feature_id}'")
        table.rows[feature_id] = row
    if pos != len(data):
        raise FormatError(f"{source}: лишние байты в конце файла признаков")
    return table


def write_features(table: FeatureTable, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_features(table))
    return path


def read_features(path: Path) -> FeatureTable:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Файл признаков не найден: {path}")
    return decode_features(path.read_bytes(), source=path.name)

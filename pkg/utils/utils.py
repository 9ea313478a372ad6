import hashlib
import json
import types
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import (
    Any,
    Type,
    TypeVar,
    Union,
    get_args,
    get_origin,
    get_type_hints,
    no_type_check,
)

import numpy as np

T = TypeVar("T")


def canonical_json(data: Any) -> str:
    """키 정렬 + 공백 고정 JSON. 해시·바이트 동일성 비교의 기준 표현."""
    return json.dumps(
        data, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path, chunk_size: int = 1 << 20) -> str:
    """파일 내용 SHA-256 (대용량 체크포인트도 chunk 단위로 읽음)"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        while chunk := f.read(chunk_size):
            digest.update(chunk)
    return digest.hexdigest()


def split_list(lst: list[Any], n_splits: int) -> list[list[Any]]:
    """리스트를 n_splits개의 대략 동일한 크기의 서브 리스트로 나눕니다."""
    k, m = divmod(len(lst), n_splits)
    return [
        lst[i * k + min(i, m) : (i + 1) * k + min(i + 1, m)]
        for i in range(n_splits)
    ]


@no_type_check
def to_dict(obj: Any) -> Any:
    """재귀적으로 dataclass를 dict로 변환 (numpy 스칼라/배열 포함)"""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in fields(obj)}
    elif isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    elif isinstance(obj, dict):
        return {k: to_dict(v) for k, v in obj.items()}
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, np.generic):
        return obj.item()
    else:
        return obj


def unwrap_optional(field_type: Any) -> Any:
    """`X | None` 에서 X 를 꺼낸다. 그 외 타입은 그대로."""
    if get_origin(field_type) in (Union, types.UnionType):
        args = [a for a in get_args(field_type) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return field_type


@no_type_check
def from_dict(cls: Type[T], data: dict[str, Any]) -> T:
    """dict에서 dataclass로 복원

    모르는 키는 무시한다. tuple 필드는 JSON 리스트를 tuple 로 되돌린다.
    """
    if not is_dataclass(cls):
        return data

    hints = get_type_hints(cls)
    kwargs = {}
    for f in fields(cls):
        if f.name not in data or not f.init:
            continue

        value = data[f.name]
        field_type = unwrap_optional(hints.get(f.name, f.type))

        if value is None:
            kwargs[f.name] = None
        # dataclass 타입 체크
        elif is_dataclass(field_type):
            kwargs[f.name] = from_dict(field_type, value)
        # List[dataclass] 처리
        elif (
            get_origin(field_type) in (list, tuple)
            and len(get_args(field_type)) > 0
            and is_dataclass(get_args(field_type)[0])
        ):
            item_type = get_args(field_type)[0]
            items = [from_dict(item_type, item) for item in value]
            kwargs[f.name] = (
                tuple(items) if get_origin(field_type) is tuple else items
            )
        elif get_origin(field_type) is tuple or field_type is tuple:
            kwargs[f.name] = tuple(value)
        else:
            kwargs[f.name] = value

    return cls(**kwargs)

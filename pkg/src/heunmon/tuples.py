"""Index tuples n = (n0, n1, n2, n3)."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidInputError


@dataclass(frozen=True)
class IndexTuple:
    n0: int
    n1: int = 0
    n2: int = 0
    n3: int = 0

    def __post_init__(self):
        for v in self.as_tuple():
            if int(v) != v or v < 0:
                raise InvalidInputError(f"indices must be nonnegative integers, got {self.as_tuple()}")
        if max(self.as_tuple()) < 1:
            raise InvalidInputError("at least one index must be positive")

    def as_tuple(self) -> tuple:
        return (self.n0, self.n1, self.n2, self.n3)

    def __iter__(self):
        return iter(self.as_tuple())

    def __getitem__(self, k):
        return self.as_tuple()[k]

    @property
    def N(self) -> int:
        return sum(self.as_tuple())

    @property
    def weight(self) -> int:
        return sum(k * (k + 1) for k in self.as_tuple()) // 2

    @property
    def coef(self) -> tuple:
        return tuple(float(k * (k + 1)) for k in self.as_tuple())

    def __str__(self):
        return ",".join(str(k) for k in self.as_tuple())


def as_tuple(n) -> IndexTuple:
    if isinstance(n, IndexTuple):
        return n
    if isinstance(n, str):
        parts = [p for p in n.replace("(", "").replace(")", "").split(",") if p.strip()]
        try:
            vals = [int(p) for p in parts]
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse index tuple {n!r}") from exc
        n = vals
    n = tuple(n)
    if len(n) != 4:
        raise InvalidInputError(f"index tuple needs four entries, got {n}")
    return IndexTuple(*n)

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AttackPath:
    """A planned route from an entry node to a node near a crown jewel.

    ``reward`` is the plan reward: the accumulated reward of the route when
    every transition succeeds.
    """

    initial: int
    terminal: int
    vertices: tuple[int, ...]
    reward: float

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if not self.vertices:
            raise ValueError("a path needs at least one vertex")
        if self.vertices[0] != self.initial or self.vertices[-1] != self.terminal:
            raise ValueError("path endpoints disagree with initial/terminal")
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError(f"path repeats a vertex: {self.vertices}")

    @property
    def hops(self) -> int:
        return len(self.vertices) - 1

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "terminal": self.terminal,
            "vertices": list(self.vertices),
            "hops": self.hops,
            "reward": self.reward,
        }

    @classmethod
    def from_dict(cls, data: dict) -> AttackPath:
        return cls(data["initial"], data["terminal"], tuple(data["vertices"]), float(data["reward"]))

"""Exception types raised across the package."""


class CjaError(Exception):
    """Base class for all package errors."""


class GraphError(CjaError, ValueError):
    """Invalid attack graph input."""


class MalformedLine(GraphError):
    def __init__(self, line_no: int, reason: str = "", source: str = ""):
        self.line_no = line_no
        self.reason = reason
        self.source = source
        where = f"{source} line {line_no}" if source else f"line {line_no}"
        super().__init__(f"malformed record at {where}" + (f": {reason}" if reason else ""))


class InvalidVertexId(GraphError):
    def __init__(self, vertex_id):
        self.vertex_id = vertex_id
        super().__init__(f"vertex id {vertex_id!r} must be a positive integer")


class DanglingArc(GraphError):
    def __init__(self, src: int, dst: int):
        self.src, self.dst = src, dst
        super().__init__(f"arc {src},{dst} references a missing vertex")


class DuplicateVertexId(GraphError):
    def __init__(self, vertex_id: int):
        self.vertex_id = vertex_id
        super().__init__(f"duplicate vertex id {vertex_id}")


class DuplicateArc(GraphError):
    def __init__(self, src: int, dst: int):
        self.src, self.dst = src, dst
        super().__init__(f"duplicate arc {src},{dst}")


class SelfLoop(GraphError):
    def __init__(self, vertex_id: int):
        self.vertex_id = vertex_id
        super().__init__(f"self-loop on vertex {vertex_id}")


class ScoreOutOfRange(GraphError):
    def __init__(self, vertex_id: int, field: str = "", value: float | None = None):
        self.vertex_id = vertex_id
        super().__init__(f"vertex {vertex_id}: {field} {value!r} outside [0, 10]")


class AnnotationError(GraphError):
    """Structural problem in the annotation sidecar."""


class UnknownVertex(CjaError, KeyError):
    def __init__(self, vertex_id):
        self.vertex_id = vertex_id
        super().__init__(vertex_id)

    def __str__(self):
        return f"unknown vertex {self.vertex_id}"


class UnknownVertexInPath(UnknownVertex):
    def __str__(self):
        return f"path references unknown vertex {self.vertex_id}"


class InfeasibleShape(CjaError, ValueError):
    pass


class Unreachable(CjaError):
    def __init__(self, initial: int, goal: int):
        self.initial, self.goal = initial, goal
        super().__init__(f"vertex {goal} is not reachable from {initial}")


class NoAdmissibleAction(CjaError):
    def __init__(self, state: int):
        self.state = state
        super().__init__(f"non-goal state {state} has no outgoing action")


class LoopDetected(CjaError):
    def __init__(self, path: list[int]):
        self.path = list(path)
        super().__init__(f"greedy policy revisits a state after {self.path}")


class NoReachableInitialNodes(CjaError):
    def __init__(self, crown_jewel: int):
        self.crown_jewel = crown_jewel
        super().__init__(f"no candidate initial node reaches the 2-hop network of {crown_jewel}")


class EmptyPathSet(CjaError, ValueError):
    pass

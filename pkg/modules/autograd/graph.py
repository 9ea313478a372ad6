"""Define-then-run expression graph (Wengert list) 과 reverse-mode 미분.

그래프는 노드 리스트이며 노드는 항상 자신의 입력보다 뒤에 추가된다. 따라서
리스트 순서가 곧 위상 정렬 순서이고 cycle 이 생길 수 없다.

leaf 종류:
- param: 학습 대상 파라미터 (gradient 기본 대상)
- input: 데이터 입력 (이름으로 바인딩)
- const: 그래프에 박혀 있는 상수
"""

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from modules.autograd.exceptions import (
    NonFiniteError,
    NonScalarRootError,
    ShapeMismatchError,
    UnboundLeafError,
    UnsupportedOpError,
)
from modules.autograd.ops import OPS
from modules.autograd.tensor import Number, Tensor, as_array

LEAF_KINDS = ("param", "input", "const")

Binding = Tensor | np.ndarray | Number


@dataclass(frozen=True)
class Node:
    id: int
    op: str
    inputs: tuple[int, ...]
    attrs: dict[str, Any] = field(default_factory=dict)
    name: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.op in LEAF_KINDS


class NodeRef:
    """그래프 노드 핸들. 산술 연산자를 오버로드해 식을 자연스럽게 쓴다."""

    __slots__ = ("graph", "id")

    def __init__(self, graph: "ExprGraph", node_id: int) -> None:
        self.graph = graph
        self.id = node_id

    @property
    def node(self) -> Node:
        return self.graph.nodes[self.id]

    def __add__(self, other):
        return self.graph.add(self, other)

    def __radd__(self, other):
        return self.graph.add(other, self)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __rsub__(self, other):
        return self.graph.sub(other, self)

    def __mul__(self, other):
        return self.graph.mul(self, other)

    def __rmul__(self, other):
        return self.graph.mul(other, self)

    def __truediv__(self, other):
        return self.graph.div(self, other)

    def __rtruediv__(self, other):
        return self.graph.div(other, self)

    def __neg__(self):
        return self.graph.neg(self)

    def __pow__(self, exponent: float):
        return self.graph.pow(self, exponent)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __getitem__(self, key):
        return self.graph.slice(self, key)

    def __repr__(self) -> str:
        node = self.node
        label = f" {node.name!r}" if node.name else ""
        return f"NodeRef({node.id}: {node.op}{label})"


class ExprGraph:
    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._names: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    # ------------------------------------------------------------------
    # leaves
    # ------------------------------------------------------------------

    def _leaf(self, kind: str, name: str) -> NodeRef:
        if name in self._names:
            raise ValueError(f"duplicate leaf name: {name}")
        ref = self._append(kind, (), {}, name)
        self._names[name] = ref.id
        return ref

    def param(self, name: str) -> NodeRef:
        return self._leaf("param", name)

    def input(self, name: str) -> NodeRef:
        return self._leaf("input", name)

    def const(self, value: Binding) -> NodeRef:
        arr = np.array(as_array(value), dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("const")
        arr.flags.writeable = False
        return self._append("const", (), {"value": arr}, None)

    def leaf(self, name: str) -> NodeRef:
        return NodeRef(self, self._names[name])

    def leaf_names(self, kind: str | None = None) -> list[str]:
        """추가된 순서대로 leaf 이름 (kind 로 필터)"""
        return [
            n.name
            for n in self.nodes
            if n.name is not None and (kind is None or n.op == kind)
        ]

    # ------------------------------------------------------------------
    # ops
    # ------------------------------------------------------------------

    def _append(
        self,
        op: str,
        inputs: tuple[int, ...],
        attrs: dict[str, Any],
        name: str | None = None,
    ) -> NodeRef:
        node = Node(len(self.nodes), op, inputs, attrs, name)
        self.nodes.append(node)
        return NodeRef(self, node.id)

    def _ref(self, operand: Any) -> NodeRef:
        if isinstance(operand, NodeRef):
            if operand.graph is not self:
                raise ValueError("operand belongs to another graph")
            return operand
        return self.const(operand)

    def apply(self, op: str, *operands: Any, **attrs: Any) -> NodeRef:
        """등록된 임의 연산 노드 추가 (register_op 로 확장한 연산 포함)"""
        if op not in OPS:
            raise UnsupportedOpError(f"unknown op: {op}")
        refs = tuple(self._ref(x).id for x in operands)
        return self._append(op, refs, attrs)

    def add(self, a, b) -> NodeRef:
        return self.apply("add", a, b)

    def sub(self, a, b) -> NodeRef:
        return self.apply("sub", a, b)

    def mul(self, a, b) -> NodeRef:
        return self.apply("mul", a, b)

    def div(self, a, b) -> NodeRef:
        return self.apply("div", a, b)

    def neg(self, a) -> NodeRef:
        return self.apply("neg", a)

    def pow(self, a, exponent: float) -> NodeRef:
        return self.apply("pow", a, exponent=float(exponent))

    def relu(self, a) -> NodeRef:
        return self.apply("relu", a)

    def sigmoid(self, a) -> NodeRef:
        return self.apply("sigmoid", a)

    def matmul(self, a, b) -> NodeRef:
        return self.apply("matmul", a, b)

    def conv2d(self, x, w, padding: str = "same") -> NodeRef:
        if padding not in ("same", "valid"):
            raise ValueError(f"unknown padding: {padding}")
        return self.apply("conv2d", x, w, padding=padding)

    def avg_pool2(self, x) -> NodeRef:
        return self.apply("avg_pool2", x)

    def max_pool2(self, x) -> NodeRef:
        return self.apply("max_pool2", x)

    def upsample2(self, x) -> NodeRef:
        return self.apply("upsample2", x)

    def sum(self, x, axis=None, keepdims: bool = False) -> NodeRef:
        return self.apply("sum", x, axis=_norm_axis(axis), keepdims=keepdims)

    def mean(self, x, axis=None, keepdims: bool = False) -> NodeRef:
        return self.apply(
            "mean", x, axis=_norm_axis(axis), keepdims=keepdims
        )

    def broadcast_to(self, x, shape: Sequence[int]) -> NodeRef:
        return self.apply("broadcast", x, shape=tuple(shape))

    def reshape(self, x, shape: Sequence[int]) -> NodeRef:
        return self.apply("reshape", x, shape=tuple(shape))

    def concat(self, xs: Iterable[Any], axis: int = 1) -> NodeRef:
        return self.apply("concat", *xs, axis=axis)

    def slice(self, x, key) -> NodeRef:
        key = key if isinstance(key, tuple) else (key,)
        return self.apply("slice", x, key=key)


def _norm_axis(axis):
    if isinstance(axis, (list, tuple)):
        return tuple(int(a) for a in axis)
    return axis


# =============================================================================
# evaluation
# =============================================================================


def _root_id(graph: ExprGraph, root: NodeRef | int | None) -> int:
    if not graph.nodes:
        raise ValueError("empty graph")
    if root is None:
        return len(graph.nodes) - 1
    return root.id if isinstance(root, NodeRef) else int(root)


def _ancestors(graph: ExprGraph, root_id: int) -> list[int]:
    """root 를 계산하는 데 필요한 노드 id (오름차순 = 평가 순서)"""
    needed = {root_id}
    for node in reversed(graph.nodes[: root_id + 1]):
        if node.id in needed:
            needed.update(node.inputs)
    return sorted(needed)


def _forward(
    graph: ExprGraph, bindings: Mapping[str, Binding], order: list[int]
) -> dict[int, np.ndarray]:
    values: dict[int, np.ndarray] = {}
    for node_id in order:
        node = graph.nodes[node_id]
        if node.op == "const":
            values[node_id] = node.attrs["value"]
            continue
        if node.is_leaf:
            if node.name not in bindings:
                raise UnboundLeafError(
                    f"{node.op} leaf {node.name!r} is not bound"
                )
            value = np.asarray(as_array(bindings[node.name]), np.float64)
            if not np.all(np.isfinite(value)):
                raise NonFiniteError(f"binding {node.name!r}")
            values[node_id] = value
            continue
        inputs = [values[i] for i in node.inputs]
        try:
            out = OPS[node.op].forward(inputs, node.attrs)
        except ShapeMismatchError:
            raise
        except (ValueError, IndexError) as e:
            raise ShapeMismatchError(
                node.op, [x.shape for x in inputs], str(e)
            ) from e
        out = np.asarray(out, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{node.op} (node {node_id})")
        values[node_id] = out
    return values


def evaluate(
    graph: ExprGraph,
    bindings: Mapping[str, Binding],
    root: NodeRef | int | None = None,
) -> Tensor:
    """root(기본: 마지막 노드)의 forward 값. 같은 바인딩이면 항상 같은 결과."""
    root_id = _root_id(graph, root)
    values = _forward(graph, bindings, _ancestors(graph, root_id))
    return Tensor._wrap(values[root_id], where="evaluate")


def value_and_gradient(
    graph: ExprGraph,
    bindings: Mapping[str, Binding],
    root: NodeRef | int | None = None,
    wrt: Sequence[str] | None = None,
) -> tuple[float, dict[str, Tensor]]:
    """scalar root 의 값과 wrt leaf 들에 대한 gradient.

    wrt 를 생략하면 root 에 닿는 모든 param leaf 가 대상이다. root 와 무관한
    leaf 는 0 gradient 를 돌려준다.
    """
    root_id = _root_id(graph, root)
    order = _ancestors(graph, root_id)
    values = _forward(graph, bindings, order)
    out = values[root_id]
    if out.size != 1:
        raise NonScalarRootError(
            f"gradient root must be scalar, got shape {out.shape}"
        )

    if wrt is None:
        wrt = graph.leaf_names("param")
    unknown = [name for name in wrt if name not in graph._names]
    if unknown:
        raise UnboundLeafError(f"unknown leaves: {unknown}")
    targets = {graph._names[name] for name in wrt}

    # wrt leaf 에 의존하는 노드만 역전파 경로에 둔다
    on_path: set[int] = set()
    for node_id in order:
        node = graph.nodes[node_id]
        if node_id in targets or any(i in on_path for i in node.inputs):
            on_path.add(node_id)

    grads: dict[int, np.ndarray] = {root_id: np.ones_like(out)}
    for node_id in reversed(order):
        node = graph.nodes[node_id]
        if node.is_leaf or node_id not in grads:
            continue
        if node_id not in on_path:
            continue
        vjp = OPS[node.op].vjp
        if vjp is None:
            raise UnsupportedOpError(f"no gradient rule for op {node.op!r}")
        g = grads[node_id]
        inputs = [values[i] for i in node.inputs]
        for input_id, input_grad in zip(
            node.inputs, vjp(g, inputs, values[node_id], node.attrs)
        ):
            if input_id not in on_path:
                continue
            input_grad = np.asarray(input_grad, dtype=np.float64)
            if input_id in grads:
                grads[input_id] = grads[input_id] + input_grad
            else:
                grads[input_id] = input_grad

    result: dict[str, Tensor] = {}
    for name in wrt:
        leaf_id = graph._names[name]
        if leaf_id in grads:
            grad = grads[leaf_id]
        elif leaf_id in values:
            grad = np.zeros_like(values[leaf_id])
        elif name in bindings:
            grad = np.zeros_like(
                np.asarray(as_array(bindings[name]), np.float64)
            )
        else:
            raise UnboundLeafError(f"leaf {name!r} is not bound")
        result[name] = Tensor._wrap(grad, where=f"gradient of {name!r}")
    return float(out.reshape(-1)[0]), result


def gradient(
    graph: ExprGraph,
    bindings: Mapping[str, Binding],
    root: NodeRef | int | None = None,
    wrt: Sequence[str] | None = None,
) -> dict[str, Tensor]:
    return value_and_gradient(graph, bindings, root, wrt)[1]

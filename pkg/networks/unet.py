"""U-Net (encoder-decoder + skip connection) 을 ExprGraph 위에 구성.

level 마다 3x3 conv + relu 두 번, 2x2 average pool 로 downsample. decoder 는
nearest upsample → skip concat → 같은 block. 마지막은 1x1 conv.
time_conditioned 이면 sinusoidal embedding 을 선형 사상한 채널별 bias 를 각
block 의 첫 conv 뒤에 더한다.
"""

import math
from typing import Callable

import numpy as np

from modules.autograd import ExprGraph, NodeRef, RngStream, evaluate
from networks.exceptions import InvalidConfigError
from networks.schemas import UNetConfig

IMAGE_INPUT = "x"
TIME_INPUT = "t_embed"

GraphBuilder = Callable[[ExprGraph], NodeRef]


def to_float32_grid(arr: np.ndarray) -> np.ndarray:
    """float32 로 표현 가능한 float64 값으로 반올림 (체크포인트 bit-exact)"""
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


def unet_param_shapes(cfg: UNetConfig) -> dict[str, tuple[int, ...]]:
    """이름 → shape (등록 순서 고정)"""
    shapes: dict[str, tuple[int, ...]] = {}

    def block(prefix: str, cin: int, cout: int) -> None:
        shapes[f"{prefix}.conv1.w"] = (cout, cin, 3, 3)
        shapes[f"{prefix}.conv1.b"] = (1, cout, 1, 1)
        if cfg.time_conditioned:
            shapes[f"{prefix}.time.w"] = (cfg.time_embed_dim, cout)
            shapes[f"{prefix}.time.b"] = (1, cout)
        shapes[f"{prefix}.conv2.w"] = (cout, cout, 3, 3)
        shapes[f"{prefix}.conv2.b"] = (1, cout, 1, 1)

    cin = cfg.in_channels
    for level in range(cfg.levels):
        block(f"enc{level}", cin, cfg.channels(level))
        cin = cfg.channels(level)
    block("mid", cin, cfg.channels(cfg.levels))
    for level in reversed(range(cfg.levels)):
        block(
            f"dec{level}",
            cfg.channels(level + 1) + cfg.channels(level),
            cfg.channels(level),
        )
    shapes["out.w"] = (cfg.out_channels, cfg.channels(0), 1, 1)
    shapes["out.b"] = (1, cfg.out_channels, 1, 1)
    return shapes


def time_embedding(t, dim: int) -> np.ndarray:
    """정수 timestep(스칼라 또는 1D) → (N, dim) sin/cos embedding"""
    steps = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = steps[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def _dirac(name: str, shape: tuple[int, ...]) -> np.ndarray:
    """입력 채널을 그대로 통과시키는 커널 (decoder 첫 conv 는 skip 채널)"""
    kernel = np.zeros(shape)
    cout, cin, kh, kw = shape
    if name == "out.w":
        kernel[:, :, 0, 0] = 1.0 / cin
        return kernel
    for o in range(cout):
        if name.startswith("dec") and name.endswith("conv1.w"):
            src = cin - cout + o
        else:
            src = o % cin
        kernel[o, src, kh // 2, kw // 2] = 1.0
    return kernel


def init_params(cfg: UNetConfig, rng: RngStream) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for name, shape in unet_param_shapes(cfg).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
            continue
        if name.endswith("time.w"):
            fan_in = shape[0]
        else:
            fan_in = int(np.prod(shape[1:]))
        bound = math.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, shape)
        if cfg.init == "dirac" and not name.endswith("time.w"):
            weight = _dirac(name, shape) + 0.1 * weight
        params[name] = to_float32_grid(weight)
    return params


class UNet:
    def __init__(
        self, cfg: UNetConfig, params: dict[str, np.ndarray] | None = None
    ) -> None:
        self.cfg = cfg
        self.shapes = unet_param_shapes(cfg)
        self.params = params if params is not None else {}
        self._graphs: dict[str, tuple[ExprGraph, NodeRef]] = {}

    @property
    def param_names(self) -> list[str]:
        return list(self.shapes)

    @property
    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes.values())

    def with_params(self, params: dict[str, np.ndarray]) -> "UNet":
        """graph cache 를 공유하는 같은 구조의 네트워크"""
        other = UNet.__new__(UNet)
        other.cfg = self.cfg
        other.shapes = self.shapes
        other.params = params
        other._graphs = self._graphs
        return other

    # ------------------------------------------------------------------
    # graph
    # ------------------------------------------------------------------

    def build(
        self, g: ExprGraph, x: NodeRef, t_embed: NodeRef | None = None
    ) -> NodeRef:
        """g 에 param leaf 를 추가하고 출력 노드를 돌려준다."""
        cfg = self.cfg
        if cfg.time_conditioned and t_embed is None:
            raise InvalidConfigError("time-conditioned U-Net needs t_embed")
        p = {name: g.param(name) for name in self.shapes}

        def block(prefix: str, h: NodeRef, channels: int) -> NodeRef:
            h = g.conv2d(h, p[f"{prefix}.conv1.w"]) + p[f"{prefix}.conv1.b"]
            if cfg.time_conditioned:
                proj = g.matmul(t_embed, p[f"{prefix}.time.w"])
                proj = proj + p[f"{prefix}.time.b"]
                h = h + g.reshape(proj, (-1, channels, 1, 1))
            h = g.relu(h)
            h = g.conv2d(h, p[f"{prefix}.conv2.w"]) + p[f"{prefix}.conv2.b"]
            return g.relu(h)

        skips: list[NodeRef] = []
        h = x
        for level in range(cfg.levels):
            h = block(f"enc{level}", h, cfg.channels(level))
            skips.append(h)
            h = g.avg_pool2(h)
        h = block("mid", h, cfg.channels(cfg.levels))
        for level in reversed(range(cfg.levels)):
            h = g.concat([g.upsample2(h), skips[level]], axis=1)
            h = block(f"dec{level}", h, cfg.channels(level))
        return g.conv2d(h, p["out.w"]) + p["out.b"]

    def cached_graph(
        self, key: str, builder: GraphBuilder
    ) -> tuple[ExprGraph, NodeRef]:
        """같은 구조의 그래프를 한 번만 만든다 (평가는 순수 함수라 공유 가능)"""
        if key not in self._graphs:
            g = ExprGraph()
            self._graphs[key] = (g, builder(g))
        return self._graphs[key]

    def _inference(self, g: ExprGraph) -> NodeRef:
        t_embed = g.input(TIME_INPUT) if self.cfg.time_conditioned else None
        return self.build(g, g.input(IMAGE_INPUT), t_embed)

    def check_input(self, x: np.ndarray) -> None:
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise InvalidConfigError(
                f"expected (N, {self.cfg.in_channels}, H, W), got {x.shape}"
            )
        d = self.cfg.divisor
        if x.shape[2] % d or x.shape[3] % d:
            raise InvalidConfigError(
                f"spatial dims {x.shape[2:]} not divisible by {d}"
            )

    def bindings(
        self,
        x: np.ndarray,
        t=None,
        params: dict[str, np.ndarray] | None = None,
    ) -> dict[str, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        self.check_input(x)
        bound = dict(params if params is not None else self.params)
        bound[IMAGE_INPUT] = x
        if self.cfg.time_conditioned:
            if t is None:
                raise InvalidConfigError("time-conditioned U-Net needs t")
            steps = np.broadcast_to(np.asarray(t), (x.shape[0],))
            bound[TIME_INPUT] = time_embedding(steps, self.cfg.time_embed_dim)
        return bound

    def forward(
        self,
        x: np.ndarray,
        t=None,
        params: dict[str, np.ndarray] | None = None,
    ) -> np.ndarray:
        """NCHW 배치 추론"""
        g, root = self.cached_graph("inference", self._inference)
        return evaluate(g, self.bindings(x, t, params), root).numpy()


def build_unet(cfg: UNetConfig, rng: RngStream) -> UNet:
    return UNet(cfg, init_params(cfg, rng))

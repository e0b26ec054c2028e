"""Declarative architecture builders.

A NetworkSpec is just an ordered list of layer descriptors plus the input
side; nnkit compiles it into a runnable network. Builders cover the nine
SVRT survey nets (depth x first-kernel grid), the PSVRT baseline, and its
wide/deep controls. Convolutions are always stride 1 and every pooling
stage is 3x3 / stride 2, so spatial size halves (ceil) exactly once per
pool.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int
    stride: int = 1

    def __post_init__(self):
        if self.stride != 1:
            raise ValueError("conv stride is fixed at 1")


@dataclass(frozen=True)
class Pool:
    kernel: int = 3
    stride: int = 2

    def __post_init__(self):
        if (self.kernel, self.stride) != (3, 2):
            raise ValueError("pooling is fixed at kernel 3, stride 2")


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class Classifier:
    classes: int = 2


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_side: int
    layers: tuple = ()
    input_channels: int = 1


def _conv_block(filters: int, kernel: int) -> list:
    return [Conv(filters, kernel), Relu(), Pool()]


def _dense_head(units: int, repeats: int = 3) -> list:
    head = []
    for _ in range(repeats):
        head += [Dense(units), Relu()]
    return head + [Classifier(2)]


FIRST_LAYER_FILTERS = {2: 6, 4: 12, 6: 18}
SVRT_DEPTHS = (2, 4, 6)
SVRT_KERNELS = (2, 4, 6)


def svrt_grid(depth: int, first_kernel: int, input_side: int = 60) -> NetworkSpec:
    """One cell of the 9-net survey grid: depth conv stages, the first with
    the given kernel and its paired filter count, later ones 2x2 with
    filters doubling, then a 1024-wide 3-layer dense head."""
    if depth not in SVRT_DEPTHS or first_kernel not in SVRT_KERNELS:
        raise ValueError(f"grid cell (depth={depth}, first_kernel={first_kernel}) not in "
                         f"{SVRT_DEPTHS} x {SVRT_KERNELS}")
    filters = FIRST_LAYER_FILTERS[first_kernel]
    layers = _conv_block(filters, first_kernel)
    for _ in range(depth - 1):
        filters *= 2
        layers += _conv_block(filters, 2)
    layers += _dense_head(1024)
    return NetworkSpec(f"svrt-d{depth}-k{first_kernel}", input_side, tuple(layers))


def psvrt_baseline(input_side: int = 60) -> NetworkSpec:
    """4 conv stages (8 filters 4x4, then 2x2 doubling), 256-wide head."""
    layers = _conv_block(8, 4) + _conv_block(16, 2) + _conv_block(32, 2) + _conv_block(64, 2)
    layers += _dense_head(256)
    return NetworkSpec("psvrt-baseline", input_side, tuple(layers))


def wide_control(input_side: int = 60) -> NetworkSpec:
    """Baseline with doubled conv filters and 4x wider dense head."""
    layers = _conv_block(16, 4) + _conv_block(32, 2) + _conv_block(64, 2) + _conv_block(128, 2)
    layers += _dense_head(1024)
    return NetworkSpec("psvrt-wide", input_side, tuple(layers))


def deep_control(input_side: int = 60) -> NetworkSpec:
    """Baseline with an extra 2x2 conv (same filter count) after each
    original conv stage; pooling stays after the original four positions
    only, so the spatial chain matches the baseline's."""
    layers: list = []
    for filters, kernel in ((8, 4), (16, 2), (32, 2), (64, 2)):
        layers += _conv_block(filters, kernel)
        layers += [Conv(filters, 2), Relu()]
    layers += _dense_head(256)
    return NetworkSpec("psvrt-deep", input_side, tuple(layers))


BUILDERS = {
    "psvrt-baseline": psvrt_baseline,
    "psvrt-wide": wide_control,
    "psvrt-deep": deep_control,
}
for _d in SVRT_DEPTHS:
    for _k in SVRT_KERNELS:
        BUILDERS[f"svrt-d{_d}-k{_k}"] = (
            lambda input_side=60, d=_d, k=_k: svrt_grid(d, k, input_side)
        )


def build(name: str, input_side: int = 60) -> NetworkSpec:
    if name not in BUILDERS:
        raise ValueError(f"unknown architecture {name!r}; known: {sorted(BUILDERS)}")
    return BUILDERS[name](input_side=input_side)


def shape_chain(spec: NetworkSpec) -> list[tuple[int, int, int]]:
    """(channels, height, width) after each layer, starting at the input."""
    c, h, w = spec.input_channels, spec.input_side, spec.input_side
    chain = [(c, h, w)]
    flat = None
    for layer in spec.layers:
        if isinstance(layer, Conv):
            c = layer.out_channels
        elif isinstance(layer, Pool):
            h, w = (h + 1) // 2, (w + 1) // 2
            if h < 1 or w < 1:
                raise ValueError(f"{spec.name}: spatial side collapsed below 1x1")
        elif isinstance(layer, Dense):
            flat = layer.units
        elif isinstance(layer, Classifier):
            flat = layer.classes
        if flat is None:
            chain.append((c, h, w))
        else:
            chain.append((flat, 1, 1))
    return chain


def param_count(spec: NetworkSpec) -> int:
    """Exact trainable parameter total, from the declarative spec alone."""
    c, h, w = spec.input_channels, spec.input_side, spec.input_side
    flat = None
    total = 0
    for layer in spec.layers:
        if isinstance(layer, Conv):
            total += layer.out_channels * (c * layer.kernel**2) + layer.out_channels
            c = layer.out_channels
        elif isinstance(layer, Pool):
            h, w = (h + 1) // 2, (w + 1) // 2
        elif isinstance(layer, (Dense, Classifier)):
            units = layer.units if isinstance(layer, Dense) else layer.classes
            fan_in = flat if flat is not None else c * h * w
            total += fan_in * units + units
            flat = units
    return total


def spec_to_text(spec: NetworkSpec) -> str:
    """Human-readable serialization, embedded in result files for provenance."""
    lines = [f"name: {spec.name}", f"input: {spec.input_side}x{spec.input_side}x{spec.input_channels}"]
    for layer in spec.layers:
        if isinstance(layer, Conv):
            lines.append(f"conv out={layer.out_channels} kernel={layer.kernel} stride={layer.stride}")
        elif isinstance(layer, Pool):
            lines.append(f"pool kernel={layer.kernel} stride={layer.stride}")
        elif isinstance(layer, Relu):
            lines.append("relu")
        elif isinstance(layer, Dense):
            lines.append(f"dense units={layer.units}")
        else:
            lines.append(f"classifier classes={layer.classes}")
    return "\n".join(lines) + "\n"


def spec_from_text(text: str) -> NetworkSpec:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    name = lines[0].split(":", 1)[1].strip()
    side = int(lines[1].split(":", 1)[1].strip().split("x")[0])
    channels = int(lines[1].split(":", 1)[1].strip().split("x")[2])
    layers: list = []
    for ln in lines[2:]:
        kind, *kv = ln.split()
        args = {k: int(v) for k, v in (item.split("=") for item in kv)}
        if kind == "conv":
            layers.append(Conv(args["out"], args["kernel"], args["stride"]))
        elif kind == "pool":
            layers.append(Pool(args["kernel"], args["stride"]))
        elif kind == "relu":
            layers.append(Relu())
        elif kind == "dense":
            layers.append(Dense(args["units"]))
        elif kind == "classifier":
            layers.append(Classifier(args["classes"]))
        else:
            raise ValueError(f"unknown layer line {ln!r}")
    return NetworkSpec(name, side, tuple(layers), channels)

"""Generator and discriminator used for singleplex-to-triplex translation.

Resnet-style generator: three stride-2 downsampling convs (32/64/128
channels), four residual blocks at the bottleneck, mirrored transposed-conv
upsampling, and a tanh head added to the input as a bounded per-pixel
correction.  PatchGAN discriminator with 6x6 kernels ending in a patch map
of scores (6x6 for 64x64 inputs).
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..autodiff import (
    Parameter,
    Tensor,
    add,
    conv2d,
    conv_transpose2d,
    instance_norm,
    leaky_relu,
    relu,
    tanh,
)

INIT_STD = 0.02
DOWNSCALE_FACTOR = 8  # three stride-2 stages


class ConvLayer:
    """Conv or transposed conv with bias, N(0, 0.02) weight init."""

    def __init__(
        self,
        rng: np.random.Generator,
        cin: int,
        cout: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
        transpose: bool = False,
        output_padding: int = 0,
        dtype=np.float32,
    ):
        shape = (cin, cout, kernel, kernel) if transpose else (cout, cin, kernel, kernel)
        self.weight = Parameter(rng.normal(0.0, INIT_STD, shape).astype(dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype))
        self.stride = stride
        self.padding = padding
        self.transpose = transpose
        self.output_padding = output_padding

    def __call__(self, x: Tensor) -> Tensor:
        if self.transpose:
            return conv_transpose2d(
                x, self.weight, self.bias,
                stride=self.stride, padding=self.padding,
                output_padding=self.output_padding,
            )
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def named_parameters(self, prefix: str) -> dict[str, Parameter]:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


class Network:
    """Base with flat parameter registry keyed by layer path."""

    def __init__(self):
        self._layers: dict[str, ConvLayer] = {}

    def _register(self, name: str, layer: ConvLayer) -> ConvLayer:
        self._layers[name] = layer
        return layer

    def named_parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for name, layer in self._layers.items():
            out.update(layer.named_parameters(name))
        return out

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def load_state(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        """Copy arrays into matching parameters; missing or misshapen
        entries raise."""
        params = self.named_parameters()
        for name, param in params.items():
            key = prefix + name
            if key not in arrays:
                raise ShapeError(f"checkpoint is missing tensor {key}")
            arr = arrays[key]
            if tuple(arr.shape) != param.data.shape:
                raise ShapeError(
                    f"checkpoint tensor {key} has shape {arr.shape}, "
                    f"expected {param.data.shape}"
                )
            param.data[...] = arr.astype(param.data.dtype)


class ResidualBlock:
    def __init__(self, rng, channels: int, dtype=np.float32):
        self.conv1 = ConvLayer(rng, channels, channels, 3, 1, 1, dtype=dtype)
        self.conv2 = ConvLayer(rng, channels, channels, 3, 1, 1, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = relu(instance_norm(self.conv1(x)))
        h = instance_norm(self.conv2(h))
        return add(h, x)

    def layers(self) -> dict[str, ConvLayer]:
        return {"conv1": self.conv1, "conv2": self.conv2}


class Generator(Network):
    """Image-to-image translator over the [0, 1] domain.

    Spatial dims must be multiples of 8 so the transposed convs exactly
    mirror the strided downsampling (tiled inference pads as needed).
    """

    def __init__(self, seed: int = 0, base_channels: int = 32, n_res: int = 4, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        c = base_channels
        self.down = [
            self._register("down0", ConvLayer(rng, 3, c, 3, 2, 1, dtype=dtype)),
            self._register("down1", ConvLayer(rng, c, 2 * c, 3, 2, 1, dtype=dtype)),
            self._register("down2", ConvLayer(rng, 2 * c, 4 * c, 3, 2, 1, dtype=dtype)),
        ]
        self.res = []
        for i in range(n_res):
            block = ResidualBlock(rng, 4 * c, dtype=dtype)
            for lname, layer in block.layers().items():
                self._register(f"res{i}.{lname}", layer)
            self.res.append(block)
        self.up = [
            self._register(
                "up0",
                ConvLayer(rng, 4 * c, 2 * c, 3, 2, 1, transpose=True, output_padding=1, dtype=dtype),
            ),
            self._register(
                "up1",
                ConvLayer(rng, 2 * c, c, 3, 2, 1, transpose=True, output_padding=1, dtype=dtype),
            ),
            self._register(
                "up2",
                ConvLayer(rng, c, c, 3, 2, 1, transpose=True, output_padding=1, dtype=dtype),
            ),
        ]
        self.head = self._register("head", ConvLayer(rng, c, 3, 3, 1, 1, dtype=dtype))

    def zero_head(self) -> None:
        """Zero the head so the network starts as the exact identity map.

        The encoder squeezes 64x64x3 inputs through an 8x8x128 bottleneck,
        which cannot carry per-pixel values; a generator forced to
        resynthesize its input from that code plateaus well below the
        fidelity the histogram metrics need.  Starting from the identity
        sidesteps resynthesis entirely: training only has to learn the
        correction.
        """
        self.head.weight.data[...] = 0.0
        self.head.bias.data[...] = 0.0

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"generator expects (N, 3, H, W), got {x.shape}")
        if x.shape[2] % DOWNSCALE_FACTOR or x.shape[3] % DOWNSCALE_FACTOR:
            raise ShapeError(
                f"generator input dims {x.shape[2]}x{x.shape[3]} must be "
                f"multiples of {DOWNSCALE_FACTOR}"
            )
        h = x
        for layer in self.down:
            h = relu(instance_norm(layer(h)))
        for block in self.res:
            h = block(h)
        for layer in self.up:
            h = relu(instance_norm(layer(h)))
        # Residual output: the input plus a tanh-bounded correction.  The
        # domain conversions clamp, so slight excursions past [0, 1] are
        # harmless, and unedited regions keep their exact pixel values.
        return add(x, tanh(self.head(h)))


class Discriminator(Network):
    """PatchGAN critic: 6x6 kernels, strides (2, 2, 1, 1), paddings
    (2, 2, 0, 0), channels 3-64-128-256-1.  A 64x64 input yields a 6x6
    score map; LSGAN losses consume the raw scores, no sigmoid."""

    def __init__(self, seed: int = 0, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
        self.c0 = self._register("c0", ConvLayer(rng, 3, 64, 6, 2, 2, dtype=dtype))
        self.c1 = self._register("c1", ConvLayer(rng, 64, 128, 6, 2, 2, dtype=dtype))
        self.c2 = self._register("c2", ConvLayer(rng, 128, 256, 6, 1, 0, dtype=dtype))
        self.c3 = self._register("c3", ConvLayer(rng, 256, 1, 6, 1, 0, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"discriminator expects (N, 3, H, W), got {x.shape}")
        h = leaky_relu(self.c0(x))
        h = leaky_relu(instance_norm(self.c1(h)))
        h = leaky_relu(instance_norm(self.c2(h)))
        return self.c3(h)

"""Network definitions: encoders, classifier heads, and the decoder.

All three architectures are parameterized by an :class:`ArchProfile` so the
same code runs the full 128x128 configuration and a desk-scale 32x32 one
that trains on a CPU in minutes. The two encoders (class-specified and
unspecified) share a shape but never share parameters; the classifier head
doubles as the adversarial classifier.

Encoder      conv(k3, s2, relu) per stage, then dense -> code (relu)
Classifier   dense -> batchnorm -> relu, twice, then dense -> softmax
Decoder      dense -> reshape -> dropout 0.5, conv(k3, relu) stack with x2
             nearest upsampling after the first stages, sigmoid output
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError
from .tensor import (
    BatchNormState,
    Tensor,
    batchnorm,
    concat,
    conv2d,
    dense,
    dropout,
    flatten_features,
    no_grad,
    relu,
    reshape,
    sigmoid,
    softmax,
    upsample2x,
)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ArchProfile:
    """Image scale, conv widths, and code sizes for one model family."""

    image_size: int = 32
    channels: tuple[int, ...] = (16, 32, 64)
    code_dim: int = 32
    decoder_seed_hw: int = 4
    class_count: int = 4

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        self.validate()

    def validate(self):
        if not _is_pow2(self.image_size) or self.image_size < 32:
            raise ValidationError(f"image_size must be a power of 2 >= 32, got {self.image_size}")
        if not _is_pow2(self.decoder_seed_hw):
            raise ValidationError(f"decoder_seed_hw must be a power of 2, got {self.decoder_seed_hw}")
        if self.image_size <= self.decoder_seed_hw:
            raise ValidationError("image_size must exceed decoder_seed_hw")
        stages = int(math.log2(self.image_size // self.decoder_seed_hw))
        if 2**stages * self.decoder_seed_hw != self.image_size:
            raise ValidationError("image_size / decoder_seed_hw must be a power of 2")
        if len(self.channels) != stages:
            raise ValidationError(
                f"channels must list one conv width per stage ({stages}), got {len(self.channels)}"
            )
        if any(c < 1 for c in self.channels):
            raise ValidationError("channels must be positive")
        if self.code_dim < 1:
            raise ValidationError("code_dim must be positive")
        if self.class_count < 2:
            raise ValidationError("class_count must be at least 2")

    @property
    def stage_count(self) -> int:
        return len(self.channels)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (1, self.image_size, self.image_size)


FULL_PROFILE = ArchProfile(image_size=128, channels=(64, 256, 1024), code_dim=256, decoder_seed_hw=16)
DESK_PROFILE = ArchProfile(image_size=32, channels=(16, 32, 64), code_dim=32, decoder_seed_hw=4)


@dataclass
class LatentCode:
    """Specified (c) and unspecified (r) code pair with their concatenation."""

    c: Tensor
    r: Tensor
    z: Tensor


def make_latent(c: Tensor, r: Tensor) -> LatentCode:
    return LatentCode(c=c, r=r, z=concat(c, r))


# -- layers ----------------------------------------------------------------------


def _uniform32(rng: np.random.Generator, shape, limit: float) -> np.ndarray:
    # float32 end to end; uniform() would allocate the draw at float64
    return (rng.random(shape, dtype=np.float32) * 2.0 - 1.0) * limit


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return _uniform32(rng, shape, math.sqrt(6.0 / fan_in))


def _xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    return _uniform32(rng, shape, math.sqrt(6.0 / (fan_in + fan_out)))


class Conv2dLayer:
    def __init__(self, in_ch: int, out_ch: int, k: int, stride: int, rng, init: str = "he"):
        fan_in = in_ch * k * k
        fan_out = out_ch * k * k
        shape = (out_ch, in_ch, k, k)
        if init == "he":
            w = _he_uniform(rng, shape, fan_in)
        else:
            w = _xavier_uniform(rng, shape, fan_in, fan_out)
        self.kernel = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=np.float32), requires_grad=True)
        self.stride = stride

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernel, self.bias, stride=self.stride)

    def parameters(self):
        return [self.kernel, self.bias]

    def named_arrays(self):
        return [("kernel", self.kernel.data), ("bias", self.bias.data)]


class DenseLayer:
    def __init__(self, in_dim: int, out_dim: int, rng, init: str = "he"):
        if init == "he":
            w = _he_uniform(rng, (out_dim, in_dim), in_dim)
        else:
            w = _xavier_uniform(rng, (out_dim, in_dim), in_dim, out_dim)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)

    def parameters(self):
        return [self.weight, self.bias]

    def named_arrays(self):
        return [("weight", self.weight.data), ("bias", self.bias.data)]


class BatchNormLayer:
    def __init__(self, num_features: int):
        self.gamma = Tensor(np.ones(num_features, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=np.float32), requires_grad=True)
        self.state = BatchNormState(num_features)

    def __call__(self, x: Tensor, mode: str) -> Tensor:
        return batchnorm(x, self.gamma, self.beta, self.state, mode=mode)

    def parameters(self):
        return [self.gamma, self.beta]

    def named_arrays(self):
        return [
            ("gamma", self.gamma.data),
            ("beta", self.beta.data),
            ("running_mean", self.state.running_mean),
            ("running_var", self.state.running_var),
        ]


class Network:
    """Shared bookkeeping: parameter lists, named arrays, snapshots."""

    def _layers(self) -> list[tuple[str, object]]:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        out = []
        for _, layer in self._layers():
            out.extend(layer.parameters())
        return out

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for prefix, layer in self._layers():
            for name, arr in layer.named_arrays():
                out.append((f"{prefix}.{name}", arr))
        return out

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def snapshot(self) -> list[np.ndarray]:
        return [arr.copy() for _, arr in self.named_arrays()]

    def restore(self, snap: list[np.ndarray]):
        arrays = self.named_arrays()
        if len(snap) != len(arrays):
            raise ShapeError("snapshot does not match network layout")
        for (_, arr), saved in zip(arrays, snap):
            np.copyto(arr, saved)

    def load_named_arrays(self, blocks: dict[str, np.ndarray]):
        for name, arr in self.named_arrays():
            if name not in blocks:
                raise ShapeError(f"missing parameter block {name!r}")
            if blocks[name].shape != arr.shape:
                raise ShapeError(
                    f"block {name!r} has shape {blocks[name].shape}, expected {arr.shape}"
                )
            np.copyto(arr, blocks[name])


class Encoder(Network):
    """Strided conv stack plus a dense projection to a single code vector."""

    def __init__(self, profile: ArchProfile, rng: np.random.Generator):
        self.profile = profile
        self.convs = []
        in_ch = 1
        for out_ch in profile.channels:
            self.convs.append(Conv2dLayer(in_ch, out_ch, k=3, stride=2, rng=rng, init="he"))
            in_ch = out_ch
        flat = profile.decoder_seed_hw**2 * profile.channels[-1]
        self.fc = DenseLayer(flat, profile.code_dim, rng, init="he")

    def _layers(self):
        out = [(f"conv{i}", c) for i, c in enumerate(self.convs)]
        out.append(("fc", self.fc))
        return out

    def forward(self, x: Tensor) -> Tensor:
        expected = self.profile.image_shape
        if x.data.shape[-3:] != expected:
            raise ShapeError(f"encoder expects image shape {expected}, got {x.data.shape}")
        h = x
        for conv in self.convs:
            h = relu(conv(h))
        return relu(self.fc(flatten_features(h)))


class ClassifierHead(Network):
    """Two dense+batchnorm blocks, then a softmax over the classes."""

    def __init__(self, code_dim: int, class_count: int, rng: np.random.Generator):
        self.code_dim = code_dim
        self.class_count = class_count
        self.fc1 = DenseLayer(code_dim, code_dim, rng, init="he")
        self.bn1 = BatchNormLayer(code_dim)
        self.fc2 = DenseLayer(code_dim, code_dim, rng, init="he")
        self.bn2 = BatchNormLayer(code_dim)
        self.fc3 = DenseLayer(code_dim, class_count, rng, init="xavier")

    def _layers(self):
        return [("fc1", self.fc1), ("bn1", self.bn1), ("fc2", self.fc2), ("bn2", self.bn2), ("fc3", self.fc3)]

    def forward(self, code: Tensor, mode: str = "eval") -> Tensor:
        single = code.data.ndim == 1
        h = reshape(code, (1, -1)) if single else code
        if h.data.shape[-1] != self.code_dim:
            raise ShapeError(f"classifier expects codes of length {self.code_dim}, got {h.data.shape}")
        h = relu(self.bn1(self.fc1(h), mode))
        h = relu(self.bn2(self.fc2(h), mode))
        probs = softmax(self.fc3(h))
        return reshape(probs, (-1,)) if single else probs


class Decoder(Network):
    """Dense seed, dropout, then conv+upsample stages back to image scale."""

    DROPOUT_RATE = 0.5

    def __init__(self, profile: ArchProfile, rng: np.random.Generator):
        self.profile = profile
        seed_hw = profile.decoder_seed_hw
        ch_last = profile.channels[-1]
        self.fc = DenseLayer(2 * profile.code_dim, seed_hw * seed_hw * ch_last, rng, init="he")
        out_channels = list(reversed(profile.channels)) + [profile.channels[0], 1]
        self.upsample_stages = profile.stage_count  # x2 per stage reaches image_size
        self.convs = []
        in_ch = ch_last
        for i, out_ch in enumerate(out_channels):
            init = "xavier" if i == len(out_channels) - 1 else "he"
            self.convs.append(Conv2dLayer(in_ch, out_ch, k=3, stride=1, rng=rng, init=init))
            in_ch = out_ch

    def _layers(self):
        out = [("fc", self.fc)]
        out.extend((f"conv{i}", c) for i, c in enumerate(self.convs))
        return out

    def forward(self, z: Tensor, mode: str = "eval", dropout_rng: np.random.Generator | None = None) -> Tensor:
        expected = 2 * self.profile.code_dim
        if z.data.shape[-1] != expected:
            raise ShapeError(f"decoder expects codes of length {expected}, got {z.data.shape}")
        single = z.data.ndim == 1
        seed_hw = self.profile.decoder_seed_hw
        ch_last = self.profile.channels[-1]
        h = relu(self.fc(z))
        if single:
            h = reshape(h, (ch_last, seed_hw, seed_hw))
        else:
            h = reshape(h, (-1, ch_last, seed_hw, seed_hw))
        h = dropout(h, self.DROPOUT_RATE, rng=dropout_rng, mode=mode)
        for i, conv in enumerate(self.convs[:-1]):
            h = relu(conv(h))
            if i < self.upsample_stages:
                h = upsample2x(h)
        return sigmoid(self.convs[-1](h))


@dataclass
class ModelBundle:
    """The five networks of one experiment, plus their profile."""

    profile: ArchProfile
    e_c: Encoder
    classifier: ClassifierHead
    e_r: Encoder
    adv_classifier: ClassifierHead
    g_r: Decoder

    def networks(self) -> list[tuple[str, Network]]:
        return [
            ("e_c", self.e_c),
            ("classifier", self.classifier),
            ("e_r", self.e_r),
            ("adv_classifier", self.adv_classifier),
            ("g_r", self.g_r),
        ]

    def parameter_count(self) -> int:
        return sum(net.parameter_count() for _, net in self.networks())


def build_models(profile: ArchProfile, rng: np.random.Generator) -> ModelBundle:
    """Construct and initialize all five networks deterministically.

    Conv and dense layers feeding relu use He-uniform initialization; the
    layers feeding softmax or sigmoid use Xavier-uniform. Biases start at
    zero. Equal seeds give bit-identical parameters.
    """
    profile.validate()
    e_c = Encoder(profile, rng)
    classifier = ClassifierHead(profile.code_dim, profile.class_count, rng)
    e_r = Encoder(profile, rng)
    adv_classifier = ClassifierHead(profile.code_dim, profile.class_count, rng)
    g_r = Decoder(profile, rng)
    return ModelBundle(profile, e_c, classifier, e_r, adv_classifier, g_r)


# -- stateless inference helpers ----------------------------------------------------


def _as_input(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def encode(encoder: Encoder, x) -> Tensor:
    """Deterministic code for an image (or batch), without graph recording."""
    with no_grad():
        return encoder.forward(_as_input(x))


def classify(head: ClassifierHead, code, mode: str = "eval") -> Tensor:
    """Class probabilities for a code (or batch of codes)."""
    code = _as_input(code)
    if mode == "eval":
        with no_grad():
            return head.forward(code, mode="eval")
    return head.forward(code, mode=mode)


def decode(decoder: Decoder, z, mode: str = "eval", dropout_rng=None) -> Tensor:
    """Image for a concatenated code (or batch)."""
    z = _as_input(z)
    if mode == "eval":
        with no_grad():
            return decoder.forward(z, mode="eval")
    return decoder.forward(z, mode=mode, dropout_rng=dropout_rng)

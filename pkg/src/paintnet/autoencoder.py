"""Convolutional autoencoder assembly, denoising corruption, and pretraining.

The model is a fixed eight-stage stack: conv, pool, conv, pool on the way
down, then unpool, deconv, unpool, deconv mirroring it on the way up.
Each decoder unpooling consumes the switches recorded by its mirror
pooling stage (the pooling closest to the input feeds the unpooling
closest to the output).  Pretraining corrupts a fresh random pixel subset
of every image each epoch and minimizes mean squared reconstruction error
against the clean original.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data.rng import Rng
from .errors import ConfigError, DataError, ShapeError
from .layers import (
    Activation,
    Conv2DLayer,
    Deconv2DLayer,
    maxpool2x2_backward,
    maxpool2x2_forward,
    unpool2x2_backward,
    unpool2x2_forward,
)
from .optim import SGDConfig, lr_at_epoch, sgd_step
from .tensor import Tensor, frobenius_sq_dist

# substream tags keeping init, corruption, and shuffle draws independent
_INIT_STREAM = 0x11
_CORRUPT_STREAM = 0xC0
_ORDER_STREAM = 0x0E


@dataclass(frozen=True)
class CAEConfig:
    """Architecture and corruption settings for the autoencoder."""

    input_size: tuple[int, int] = (256, 256)
    conv_channels: tuple[int, int] = (100, 200)
    input_channels: int = 3
    kernel: int = 5
    tied_decoder: bool = True
    corruption_fraction: float = 0.2
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        h, w = self.input_size
        if h % 4 or w % 4:
            raise ConfigError(f"input size must be divisible by 4 (two 2x2 pools), got {h}x{w}")
        c1, c2 = self.conv_channels
        if c1 < 1 or c2 < 1:
            raise ConfigError(f"conv channels must be >= 1, got {self.conv_channels}")
        if self.input_channels < 1:
            raise ConfigError(f"input channels must be >= 1, got {self.input_channels}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if not 0.0 <= self.corruption_fraction <= 1.0:
            raise ConfigError(
                f"corruption fraction must be in [0, 1], got {self.corruption_fraction}")


def shape_chain(config: CAEConfig) -> list[tuple[int, int, int]]:
    """(channels, height, width) after every stage, input included.

    Pure arithmetic; safe to call for configurations far too large to
    instantiate.
    """
    h, w = config.input_size
    c0 = config.input_channels
    c1, c2 = config.conv_channels
    return [
        (c0, h, w),
        (c1, h, w),
        (c1, h // 2, w // 2),
        (c2, h // 2, w // 2),
        (c2, h // 4, w // 4),
        (c2, h // 2, w // 2),
        (c1, h // 2, w // 2),
        (c1, h, w),
        (c0, h, w),
    ]


@dataclass(frozen=True)
class CorruptionMask:
    """Pixel coordinates zeroed across all channels of one image."""

    coords: frozenset[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.coords)


class CAEModel:
    """Encoder conv/pool pair stack plus its mirrored unpool/deconv decoder."""

    def __init__(self, config: CAEConfig, conv1: Conv2DLayer, conv2: Conv2DLayer,
                 dec2: Deconv2DLayer, dec1: Deconv2DLayer):
        self.config = config
        self.conv1 = conv1
        self.conv2 = conv2
        self.dec2 = dec2  # mirrors conv2: maps c2 feature maps back to c1
        self.dec1 = dec1  # mirrors conv1: maps c1 feature maps back to the image

    def shape_chain(self) -> list[tuple[int, int, int]]:
        return shape_chain(self.config)

    def named_parameters(self) -> dict[str, Tensor]:
        params = {
            "enc1.W": self.conv1.weights,
            "enc1.b": self.conv1.bias,
            "enc2.W": self.conv2.weights,
            "enc2.b": self.conv2.bias,
        }
        if not self.config.tied_decoder:
            params["dec2.W"] = self.dec2.weights
            params["dec1.W"] = self.dec1.weights
        params["dec2.b"] = self.dec2.bias
        params["dec1.b"] = self.dec1.bias
        return params

    def forward(self, x: Tensor):
        """Run the full stack; returns (reconstruction, caches)."""
        expected = (self.config.input_channels, *self.config.input_size)
        if x.shape != expected:
            raise ShapeError(f"autoencoder input must be {expected}, got {x.shape}")
        a1, c_conv1 = self.conv1.forward(x)
        p1, s1 = maxpool2x2_forward(a1)
        a2, c_conv2 = self.conv2.forward(p1)
        p2, s2 = maxpool2x2_forward(a2)
        u2 = unpool2x2_forward(p2, s2)
        d2, c_dec2 = self.dec2.forward(u2)
        u1 = unpool2x2_forward(d2, s1)
        recon, c_dec1 = self.dec1.forward(u1)
        caches = {"conv1": c_conv1, "s1": s1, "conv2": c_conv2, "s2": s2,
                  "dec2": c_dec2, "dec1": c_dec1}
        return recon, caches

    def backward(self, caches, grad_recon: Tensor) -> dict[str, Tensor]:
        """Parameter gradients for a reconstruction-loss gradient.

        Tied decoder kernels contribute their gradient to the shared
        encoder weights.
        """
        g_u1, g_dec1 = self.dec1.backward(caches["dec1"], grad_recon)
        g_d2 = unpool2x2_backward(caches["s1"], g_u1)
        g_u2, g_dec2 = self.dec2.backward(caches["dec2"], g_d2)
        g_p2 = unpool2x2_backward(caches["s2"], g_u2)
        g_a2 = maxpool2x2_backward(caches["s2"], g_p2)
        g_p1, g_conv2 = self.conv2.backward(caches["conv2"], g_a2)
        g_a1 = maxpool2x2_backward(caches["s1"], g_p1)
        _, g_conv1 = self.conv1.backward(caches["conv1"], g_a1)

        grads = {
            "enc1.W": g_conv1["W"],
            "enc1.b": g_conv1["b"],
            "enc2.W": g_conv2["W"],
            "enc2.b": g_conv2["b"],
        }
        if self.config.tied_decoder:
            grads["enc2.W"] = grads["enc2.W"] + g_dec2["tied_W"]
            grads["enc1.W"] = grads["enc1.W"] + g_dec1["tied_W"]
        else:
            grads["dec2.W"] = g_dec2["W"]
            grads["dec1.W"] = g_dec1["W"]
        grads["dec2.b"] = g_dec2["b"]
        grads["dec1.b"] = g_dec1["b"]
        return grads

    # protocol used by optim.grad_check
    def loss_value(self, x: Tensor, clean: Tensor) -> float:
        recon, _ = self.forward(x)
        return reconstruction_loss(recon, clean)

    def loss_and_param_grads(self, x: Tensor, clean: Tensor):
        recon, caches = self.forward(x)
        loss = reconstruction_loss(recon, clean)
        grad_recon = 2.0 * (recon - clean) / recon.size
        return loss, self.backward(caches, grad_recon)


def build_cae(config: CAEConfig, seed: int) -> CAEModel:
    """Construct the stack with seeded weight init.

    Weights are drawn uniform in +-sqrt(6/fan_in), biases start at zero;
    the draw order (conv1, conv2, then decoder kernels when untied) is
    fixed so a seed pins every parameter.
    """
    rng = Rng.stream(seed, _INIT_STREAM)
    c1, c2 = config.conv_channels
    conv1 = Conv2DLayer.create(config.input_channels, c1, config.kernel,
                               config.hidden_activation, rng)
    conv2 = Conv2DLayer.create(c1, c2, config.kernel, config.hidden_activation, rng)
    if config.tied_decoder:
        dec2 = Deconv2DLayer.tied(conv2, config.hidden_activation)
        dec1 = Deconv2DLayer.tied(conv1, config.output_activation)
    else:
        dec2 = Deconv2DLayer.create_learned(c2, c1, config.kernel,
                                            config.hidden_activation, rng)
        dec1 = Deconv2DLayer.create_learned(c1, config.input_channels, config.kernel,
                                            config.output_activation, rng)
    return CAEModel(config, conv1, conv2, dec2, dec1)


def corrupt(image: Tensor, fraction: float, rng: Rng) -> tuple[Tensor, CorruptionMask]:
    """Zero a random pixel subset across all channels; the original is untouched.

    Exactly round(fraction * H * W) distinct pixel locations are chosen
    uniformly without replacement from the seeded generator.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"corruption fraction must be in [0, 1], got {fraction}")
    if image.ndim != 3:
        raise ShapeError(f"corrupt expects a (c, h, w) image, got {image.shape}")
    h, w = image.shape[1], image.shape[2]
    count = int(np.floor(fraction * h * w + 0.5))
    picks = rng.sample_indices(h * w, count)
    rows = picks // w
    cols = picks % w
    out = image.copy()
    out[:, rows, cols] = 0.0
    mask = CorruptionMask(frozenset(zip(rows.tolist(), cols.tolist())))
    return out, mask


def reconstruction_loss(reconstruction: Tensor, clean_original: Tensor) -> float:
    """Per-element mean squared error against the clean image."""
    if reconstruction.shape != clean_original.shape:
        raise ShapeError(
            f"loss shape mismatch: {reconstruction.shape} vs {clean_original.shape}")
    return frobenius_sq_dist(reconstruction, clean_original) / reconstruction.size


def _batches(order: list[int], size: int):
    for i in range(0, len(order), size):
        yield order[i:i + size]


def _mean_grads(per_sample: list[dict[str, Tensor]]) -> dict[str, Tensor]:
    # fixed sample-index accumulation order keeps results bit-identical
    # across thread counts
    total = {k: v.copy() for k, v in per_sample[0].items()}
    for grads in per_sample[1:]:
        for k in total:
            total[k] += grads[k]
    inv = 1.0 / len(per_sample)
    for k in total:
        total[k] *= inv
    return total


def pretrain(model: CAEModel, images: list[Tensor], opt: SGDConfig, epochs: int,
             seed: int, threads: int = 1) -> tuple[CAEModel, list[tuple[int, float, float]]]:
    """Denoising minibatch SGD on reconstruction loss.

    Every epoch draws a fresh corruption mask per image from the
    (seed, epoch, image index) substream, shuffles the visit order, and
    applies the scheduled learning rate.  Returns the model and rows of
    (epoch, learning_rate, mean_loss).  Fully deterministic given seed.
    """
    if not images:
        raise DataError("pretraining needs a non-empty image list")
    expected = (model.config.input_channels, *model.config.input_size)
    for i, img in enumerate(images):
        if img.shape != expected:
            raise ShapeError(f"image {i} has shape {img.shape}, expected {expected}")

    fraction = model.config.corruption_fraction
    params = model.named_parameters()
    log: list[tuple[int, float, float]] = []

    def sample_loss_and_grads(args):
        epoch, idx = args
        rng = Rng.stream(seed, _CORRUPT_STREAM, epoch, idx)
        corrupted, _ = corrupt(images[idx], fraction, rng)
        loss, grads = model.loss_and_param_grads(corrupted, images[idx])
        return loss, grads

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for epoch in range(epochs):
            lr = lr_at_epoch(opt, epoch)
            order = list(range(len(images)))
            Rng.stream(seed, _ORDER_STREAM, epoch).shuffle(order)
            epoch_losses = []
            for batch in _batches(order, opt.batch_size):
                work = [(epoch, idx) for idx in batch]
                results = list(pool.map(sample_loss_and_grads, work)) if pool \
                    else [sample_loss_and_grads(w) for w in work]
                epoch_losses.extend(loss for loss, _ in results)
                sgd_step(params, _mean_grads([g for _, g in results]), lr)
            log.append((epoch, lr, float(np.mean(epoch_losses))))
    finally:
        if pool:
            pool.shutdown()
    return model, log


@dataclass
class EncoderStack:
    """The convolution/pooling front half of a trained autoencoder.

    Holds copies of the conv layers, so fine-tuning a classifier built
    from it never mutates the autoencoder it came from.
    """

    input_channels: int
    input_size: tuple[int, int]
    conv1: Conv2DLayer
    conv2: Conv2DLayer
    layer_kinds: tuple[str, ...] = field(default=("conv", "pool", "conv", "pool"))

    def forward(self, x: Tensor):
        a1, c_conv1 = self.conv1.forward(x)
        p1, s1 = maxpool2x2_forward(a1)
        a2, c_conv2 = self.conv2.forward(p1)
        p2, s2 = maxpool2x2_forward(a2)
        caches = {"conv1": c_conv1, "s1": s1, "conv2": c_conv2, "s2": s2}
        return p2, caches

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        h, w = self.input_size
        return (self.conv2.out_channels, h // 4, w // 4)


def encoder_extract(model: CAEModel) -> EncoderStack:
    """Copy out the encoder (input contract, conv, pool, conv, pool)."""
    return EncoderStack(
        input_channels=model.config.input_channels,
        input_size=model.config.input_size,
        conv1=model.conv1.copy(),
        conv2=model.conv2.copy(),
    )

"""Encoder-decoder perception model: RGB frame -> 64-d latent -> 13-class semantics.

The encoder halves the image with conv(k=4, s=2, p=1) stages down to 4x4 and
then collapses it with conv(k=4, s=1, p=0) to a 1x1x64 latent. The decoder
mirrors it with transposed convolutions. There are no skip connections, so
everything the decoder needs must pass through the latent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from lsrl import semantics as sem
from lsrl.nn import Adam, Conv2d, ConvTranspose2d, LeakyReLU, Sequential, weighted_ce_loss
from lsrl.simenv.env import DrivingEnv
from lsrl.simenv.render import WeatherPreset, render_rgb, render_semantic

LATENT_DIM = 64
LEAKY_SLOPE = 0.2


def default_schedule(input_size: int) -> tuple[int, ...]:
    n = _halving_stages(input_size)
    return tuple(min(256, 32 * 2**i) for i in range(n))


def _halving_stages(input_size: int) -> int:
    if input_size < 32 or input_size & (input_size - 1):
        raise ValueError(f"input size must be a power of two >= 32, got {input_size}")
    return int(math.log2(input_size // 4))


@dataclass(frozen=True)
class EncoderDecoderSpec:
    input_size: int = 64
    channel_schedule: tuple[int, ...] = (32, 64, 128, 256)
    latent_dim: int = LATENT_DIM

    def __post_init__(self):
        n = _halving_stages(self.input_size)
        if len(self.channel_schedule) != n:
            raise ValueError(
                f"input size {self.input_size} needs {n} halving stages, "
                f"got a schedule of {len(self.channel_schedule)}"
            )
        if self.latent_dim != LATENT_DIM:
            raise ValueError("latent_dim is fixed at 64")

    @classmethod
    def for_size(cls, input_size: int) -> "EncoderDecoderSpec":
        return cls(input_size, default_schedule(input_size))

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "channel_schedule": list(self.channel_schedule),
            "latent_dim": self.latent_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderDecoderSpec":
        return cls(int(d["input_size"]), tuple(int(c) for c in d["channel_schedule"]), int(d["latent_dim"]))


@dataclass
class PerceptionModel:
    spec: EncoderDecoderSpec
    encoder: Sequential
    decoder: Sequential

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"encoder.{k}": v for k, v in self.encoder.named_params()}
        out.update({f"decoder.{k}": v for k, v in self.decoder.named_params()})
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {f"encoder.{k}": v for k, v in self.encoder.named_grads()}
        out.update({f"decoder.{k}": v for k, v in self.decoder.named_grads()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        enc = {k[len("encoder."):]: v for k, v in state.items() if k.startswith("encoder.")}
        dec = {k[len("decoder."):]: v for k, v in state.items() if k.startswith("decoder.")}
        if len(enc) + len(dec) != len(state):
            raise ValueError("unexpected parameter names in perception state")
        self.encoder.load_state_dict(enc)
        self.decoder.load_state_dict(dec)


def build_model(spec: EncoderDecoderSpec, seed: int = 0) -> PerceptionModel:
    rng = np.random.default_rng(seed)
    chans = (3,) + tuple(spec.channel_schedule)
    enc_layers = []
    for c_in, c_out in zip(chans[:-1], chans[1:]):
        enc_layers += [Conv2d(c_in, c_out, 4, 2, 1, rng), LeakyReLU(LEAKY_SLOPE)]
    enc_layers.append(Conv2d(chans[-1], spec.latent_dim, 4, 1, 0, rng))

    dec_chans = tuple(reversed(spec.channel_schedule)) + (sem.NUM_CLASSES,)
    dec_layers = [ConvTranspose2d(spec.latent_dim, dec_chans[0], 4, 1, 0, rng), LeakyReLU(LEAKY_SLOPE)]
    for i, (c_in, c_out) in enumerate(zip(dec_chans[:-1], dec_chans[1:])):
        dec_layers.append(ConvTranspose2d(c_in, c_out, 4, 2, 1, rng))
        if i < len(dec_chans) - 2:
            dec_layers.append(LeakyReLU(LEAKY_SLOPE))
    return PerceptionModel(spec, Sequential(enc_layers), Sequential(dec_layers))


def preprocess(images: np.ndarray) -> np.ndarray:
    """uint8 (H, W, 3) or (N, H, W, 3) -> float64 NCHW in [-1, 1]."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    return x.transpose(0, 3, 1, 2) / 127.5 - 1.0


def _check_size(model: PerceptionModel, images: np.ndarray) -> None:
    s = model.spec.input_size
    if images.shape[-3:] != (s, s, 3):
        raise ValueError(f"expected {s}x{s}x3 images, got {images.shape}")


def encode(model: PerceptionModel, images: np.ndarray) -> np.ndarray:
    """Latent vector(s): (64,) for one image, (N, 64) for a batch."""
    images = np.asarray(images)
    _check_size(model, images)
    z = model.encoder.forward(preprocess(images)).reshape(-1, model.spec.latent_dim)
    return z[0] if images.ndim == 3 else z


def decode(model: PerceptionModel, latent: np.ndarray) -> np.ndarray:
    """Logits (13, S, S) for one latent, (N, 13, S, S) for a batch."""
    latent = np.asarray(latent, dtype=np.float64)
    single = latent.ndim == 1
    z = latent.reshape(-1, model.spec.latent_dim, 1, 1)
    logits = model.decoder.forward(z)
    return logits[0] if single else logits


def predict(model: PerceptionModel, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Argmax class ids (N, S, S) for a batch of images."""
    images = np.asarray(images)
    out = []
    for i in range(0, len(images), batch_size):
        logits = decode(model, encode(model, images[i : i + batch_size]).reshape(-1, LATENT_DIM))
        out.append(np.argmax(logits, axis=1).astype(np.uint8))
    return np.concatenate(out)


# -- dataset ----------------------------------------------------------------------


@dataclass
class PerceptionDataset:
    rgb: np.ndarray  # (N, S, S, 3) uint8
    semantic: np.ndarray  # (N, S, S) uint8
    weather_ids: list[str]  # preset id per frame
    track: str = ""
    seed: int = 0
    class_weights: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rgb.shape[:3] != self.semantic.shape:
            raise ValueError("rgb and semantic frames disagree in shape")
        if len(self.weather_ids) != len(self.rgb):
            raise ValueError("one weather id per frame required")

    def __len__(self) -> int:
        return len(self.rgb)

    @property
    def size(self) -> int:
        return self.rgb.shape[1]

    def subset(self, idx) -> "PerceptionDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return PerceptionDataset(
            self.rgb[idx], self.semantic[idx], [self.weather_ids[i] for i in idx],
            self.track, self.seed, self.class_weights, dict(self.metadata),
        )

    def split(self, holdout: float, seed: int = 0) -> tuple["PerceptionDataset", "PerceptionDataset"]:
        order = np.random.default_rng(seed).permutation(len(self))
        n_test = max(1, int(round(holdout * len(self))))
        return self.subset(np.sort(order[n_test:])), self.subset(np.sort(order[:n_test]))


def collect_dataset(
    env: DrivingEnv,
    n_frames: int,
    weathers: Sequence[WeatherPreset] | None = None,
    seed: int = 0,
    random_spawn: bool = True,
) -> PerceptionDataset:
    """Drive a uniform-random steering policy and record (RGB, semantics) pairs.

    Each episode picks a weather preset from ``weathers`` (default: the env's).
    With ``random_spawn`` episodes start at jittered poses along the whole
    track so later turn sections are covered too.
    """
    if n_frames <= 0:
        raise ValueError("n_frames must be positive")
    rng = np.random.default_rng(seed)
    env.seed(int(rng.integers(2**63)))
    weathers = list(weathers) if weathers else env.weathers
    s = env.resolution
    rgb = np.empty((n_frames, s, s, 3), dtype=np.uint8)
    grid = np.empty((n_frames, s, s), dtype=np.uint8)
    ids: list[str] = []
    res = None
    for i in range(n_frames):
        if res is None or res.done:
            weather = weathers[int(rng.integers(len(weathers)))]
            pose = env.random_pose(rng) if random_spawn else None
            res = env.reset(pose=pose, weather=weather)
        else:
            res = env.step(int(rng.integers(3)))
        rgb[i], grid[i] = res.rgb, res.semantic
        ids.append(env.weather.id)
    return PerceptionDataset(rgb, grid, ids, env.track.name, seed)


# -- training and metrics --------------------------------------------------------------


def _one_hot_batch(grids: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.eye(sem.NUM_CLASSES)[grids], -1, 1)


def train_step(model: PerceptionModel, images, grids, weights, optimizer) -> float:
    x = preprocess(images)
    z = model.encoder.forward(x)
    logits = model.decoder.forward(z)
    loss, dlogits = weighted_ce_loss(logits, _one_hot_batch(grids), weights)
    dz = model.decoder.backward(dlogits)
    model.encoder.backward(dz)
    optimizer.step(model.state_dict(), model.grads())
    return loss


def train_perception(
    model: PerceptionModel,
    dataset: PerceptionDataset,
    class_weights: np.ndarray,
    epochs: int = 30,
    batch_size: int = 16,
    optimizer=None,
    seed: int = 0,
    on_epoch: Callable[[int, float, PerceptionModel], bool | None] | None = None,
) -> list[float]:
    """Minibatch training on the weighted cross-entropy; returns per-epoch mean loss.

    ``on_epoch(epoch, mean_loss, model)`` may return True to stop early.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    weights = np.asarray(class_weights, dtype=np.float64)
    if weights.shape != (sem.NUM_CLASSES,) or abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < 0):
        raise ValueError("class weights must be 13 non-negative values summing to 1")
    optimizer = optimizer or Adam(1e-3)
    rng = np.random.default_rng(seed)
    curve = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        losses = []
        for i in range(0, len(order), batch_size):
            idx = np.sort(order[i : i + batch_size])
            losses.append(train_step(model, dataset.rgb[idx], dataset.semantic[idx], weights, optimizer))
        curve.append(float(np.mean(losses)))
        if on_epoch is not None and on_epoch(epoch, curve[-1], model):
            break
    return curve


def _check_nonempty(dataset: PerceptionDataset) -> None:
    if len(dataset) == 0:
        raise ValueError("metric needs a non-empty dataset")


def accuracy_from_predictions(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(pred == truth))


def iou_from_predictions(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean IoU over classes present in the ground truth."""
    ious = []
    for c in np.unique(truth):
        p, t = pred == c, truth == c
        ious.append(np.logical_and(p, t).sum() / np.logical_or(p, t).sum())
    return float(np.mean(ious))


def pixel_accuracy(model: PerceptionModel, dataset: PerceptionDataset) -> float:
    _check_nonempty(dataset)
    return accuracy_from_predictions(predict(model, dataset.rgb), dataset.semantic)


def mean_class_iou(model: PerceptionModel, dataset: PerceptionDataset) -> float:
    _check_nonempty(dataset)
    return iou_from_predictions(predict(model, dataset.rgb), dataset.semantic)


def latent_invariance_score(
    model: PerceptionModel,
    env: DrivingEnv,
    poses: Sequence[tuple[float, float, float]],
    weathers: Sequence[WeatherPreset],
    seed: int = 0,
) -> float:
    """Mean latent distance across weathers (pose fixed) over mean distance across poses (weather fixed)."""
    if len(poses) < 2 or len(weathers) < 2:
        raise ValueError("need at least two poses and two weathers")
    rng = np.random.default_rng(seed)
    from lsrl.simenv.env import reset as spawn_state  # local: avoid name clash with env.reset

    base = spawn_state(env.track)
    images = np.empty((len(poses), len(weathers), env.resolution, env.resolution, 3), dtype=np.uint8)
    for i, (x, y, h) in enumerate(poses):
        grid = render_semantic(
            type(base)(x, y, h), env.track, env.window, env.resolution, env.params
        )
        for j, w in enumerate(weathers):
            images[i, j] = render_rgb(grid, w, rng)
    z = encode(model, images.reshape((-1,) + images.shape[2:])).reshape(len(poses), len(weathers), -1)

    def mean_pairwise(a: np.ndarray) -> float:
        # a: (groups, members, dim) -> mean distance between members within each group
        diff = a[:, :, None, :] - a[:, None, :, :]
        d = np.sqrt((diff**2).sum(-1))
        m = a.shape[1]
        iu = np.triu_indices(m, 1)
        return float(d[:, iu[0], iu[1]].mean())

    across_weather = mean_pairwise(z)
    across_pose = mean_pairwise(z.transpose(1, 0, 2))
    if across_pose == 0:
        raise ValueError("latents do not vary across poses; ratio undefined")
    return across_weather / across_pose

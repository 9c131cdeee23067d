"""Synthetic 4-class image benchmark, file I/O, and the evaluation protocol.

The generator stands in for a private CT study: four lesion-like classes
whose identity is carried by interior texture and contrast while position,
size, and orientation vary freely. Class 0 is a dark smooth-interior blob,
class 1 a mid-gray blob with fine speckle, class 2 a bright-rimmed blob
with low-frequency mottle, and class 3 plain parenchyma texture with no
blob at all.

Also here: bilinear ROI resizing, online affine augmentation (scale,
rotation, translation), stratified k-fold splitting with a per-fold
validation share, and the "FFDS" dataset file format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DataError, FormatError, ValidationError, VersionError
from .models import ArchProfile
from .seeding import derive_rng

DEFAULT_CLASS_NAMES = ("cyst", "metastasis", "hemangioma", "healthy")
DEFAULT_CLASS_COUNTS = (66, 81, 65, 27)

FFDS_MAGIC = b"FFDS"
FFDS_VERSION = 1


@dataclass
class Sample:
    """One labeled image with a probability target and a unique id."""

    image: np.ndarray  # (1, H, W) float32 in [0, 1]
    label: int
    target: np.ndarray  # (class_count,) float32 on the simplex
    id: int


@dataclass
class Dataset:
    samples: list[Sample]
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES
    image_size: int = 32

    def __len__(self):
        return len(self.samples)

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def by_class(self) -> dict[int, list[Sample]]:
        groups: dict[int, list[Sample]] = {c: [] for c in range(self.class_count)}
        for s in self.samples:
            groups[s.label].append(s)
        return groups

    def subset(self, ids) -> "Dataset":
        wanted = set(int(i) for i in ids)
        picked = [s for s in self.samples if s.id in wanted]
        return Dataset(picked, self.class_names, self.image_size)

    def images(self) -> np.ndarray:
        return np.stack([s.image for s in self.samples])

    def targets(self) -> np.ndarray:
        return np.stack([s.target for s in self.samples])

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def validate(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DataError("sample ids must be unique")
        for s in self.samples:
            if not 0 <= s.label < self.class_count:
                raise DataError(f"label {s.label} out of range for {self.class_count} classes")


def one_hot(label: int, class_count: int) -> np.ndarray:
    t = np.zeros(class_count, dtype=np.float32)
    t[label] = 1.0
    return t


# -- synthetic generation -----------------------------------------------------------


def _parenchyma(rng: np.random.Generator, side: int) -> np.ndarray:
    """Smooth mid-dark background texture."""
    base = rng.uniform(0.30, 0.42)
    tex = gaussian_filter(rng.standard_normal((side, side)), sigma=side / 10.0)
    tex = tex / (np.abs(tex).max() + 1e-8)
    return base + 0.05 * tex


def _blob_mask(rng: np.random.Generator, side: int) -> np.ndarray:
    """Soft elliptical mask with free position, size, and orientation."""
    cy = side * (0.5 + rng.uniform(-0.18, 0.18))
    cx = side * (0.5 + rng.uniform(-0.18, 0.18))
    ry = side * rng.uniform(0.16, 0.30)
    rx = side * rng.uniform(0.16, 0.30)
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    y0, x0 = yy - cy, xx - cx
    yr = np.cos(theta) * y0 + np.sin(theta) * x0
    xr = -np.sin(theta) * y0 + np.cos(theta) * x0
    dist = np.sqrt((yr / ry) ** 2 + (xr / rx) ** 2)
    edge = 0.08
    return np.clip((1.0 - dist) / edge, 0.0, 1.0) ** 1.0


def _speckle(rng: np.random.Generator, side: int, density: float, amplitude: float) -> np.ndarray:
    """Fine salt-like texture."""
    spots = (rng.random((side, side)) < density).astype(np.float64)
    return amplitude * gaussian_filter(spots, sigma=0.6)


def _mottle(rng: np.random.Generator, side: int, amplitude: float) -> np.ndarray:
    """Low-frequency blotchy texture."""
    tex = gaussian_filter(rng.standard_normal((side, side)), sigma=side / 14.0)
    return amplitude * tex / (np.abs(tex).max() + 1e-8)


def _render_class(rng: np.random.Generator, side: int, label: int) -> np.ndarray:
    img = _parenchyma(rng, side)
    if label == 3:
        img = img + _mottle(rng, side, amplitude=0.03)
    else:
        mask = _blob_mask(rng, side)
        if label == 0:
            interior = rng.uniform(0.04, 0.12) + _mottle(rng, side, amplitude=0.015)
        elif label == 1:
            interior = rng.uniform(0.40, 0.52) + _speckle(rng, side, density=0.20, amplitude=0.9)
            interior = interior + _mottle(rng, side, amplitude=0.02)
        else:
            interior = rng.uniform(0.42, 0.54) + _mottle(rng, side, amplitude=0.14)
            rim = np.clip(mask * (1.0 - mask) * 4.0, 0.0, 1.0)
            interior = interior + rim * rng.uniform(0.25, 0.40)
        img = img * (1.0 - mask) + interior * mask
    img = img + rng.normal(0.0, 0.02, (side, side))
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(
    counts=DEFAULT_CLASS_COUNTS,
    profile: ArchProfile | None = None,
    seed: int = 0,
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES,
) -> Dataset:
    """Deterministic benchmark with the requested per-class sample counts."""
    profile = profile or ArchProfile()
    if len(counts) != len(class_names):
        raise DataError(f"need one count per class, got {len(counts)} for {len(class_names)} classes")
    if any(c < 1 for c in counts):
        raise DataError("per-class counts must be positive")
    side = profile.image_size
    samples = []
    next_id = 0
    for label, count in enumerate(counts):
        for _ in range(count):
            rng = derive_rng(seed, "synthetic", label, next_id)
            img = _render_class(rng, side, label).astype(np.float32)[None]
            samples.append(Sample(img, label, one_hot(label, len(class_names)), next_id))
            next_id += 1
    return Dataset(samples, tuple(class_names), side)


# -- resampling ----------------------------------------------------------------------


def _bilinear_gather(img: np.ndarray, ys: np.ndarray, xs: np.ndarray, zero_outside: bool) -> np.ndarray:
    """Sample ``img`` (H, W) at float coordinates.

    ``zero_outside`` treats everything beyond the image as zero; otherwise
    coordinates are clamped to the border (edge replication).
    """
    h, w = img.shape
    if not zero_outside:
        ys = np.clip(ys, 0.0, h - 1.0)
        xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    wy = ys - y0
    wx = xs - x0
    out = np.zeros(ys.shape, dtype=np.float64)
    for dy, dx, wgt in (
        (0, 0, (1 - wy) * (1 - wx)),
        (0, 1, (1 - wy) * wx),
        (1, 0, wy * (1 - wx)),
        (1, 1, wy * wx),
    ):
        yi = y0 + dy
        xi = x0 + dx
        valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        out += np.where(valid, vals, 0.0) * wgt
    return out


def resize_roi(image: np.ndarray, target: int) -> np.ndarray:
    """Bilinear resize of a (1, h, w) image to (1, target, target).

    Uses half-pixel centers with edge clamping, so resizing to the same
    size is the identity and constant images stay constant.
    """
    if image.ndim != 3 or image.shape[0] != 1:
        raise ValidationError(f"resize_roi expects a (1, h, w) image, got {image.shape}")
    _, h, w = image.shape
    if h < 2 or w < 2:
        raise ValidationError(f"resize_roi needs at least 2x2 input, got {h}x{w}")
    ys = (np.arange(target, dtype=np.float64) + 0.5) * (h / target) - 0.5
    xs = (np.arange(target, dtype=np.float64) + 0.5) * (w / target) - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    out = _bilinear_gather(image[0].astype(np.float64), grid_y, grid_x, zero_outside=False)
    return out.astype(np.float32)[None]


@dataclass(frozen=True)
class AffineRanges:
    """Sampling ranges for the online augmentation."""

    scale: tuple[float, float] = (0.9, 1.1)
    rotation_deg: float = 15.0
    translate_frac: float = 0.10


def apply_affine(image: np.ndarray, scale: float, rotation_deg: float, ty: float, tx: float) -> np.ndarray:
    """Affine transform about the image center with fixed parameters.

    Bilinear resampling, zero padding outside the frame, clamped to [0, 1],
    same shape as the input.
    """
    _, h, w = image.shape
    theta = np.deg2rad(rotation_deg)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # invert the output->input mapping: undo translation, rotation, scale
    y0 = yy - cy - ty
    x0 = xx - cx - tx
    cos_t, sin_t = np.cos(-theta), np.sin(-theta)
    ys = (cos_t * y0 - sin_t * x0) / scale + cy
    xs = (sin_t * y0 + cos_t * x0) / scale + cx
    out = _bilinear_gather(image[0].astype(np.float64), ys, xs, zero_outside=True)
    return np.clip(out, 0.0, 1.0).astype(np.float32)[None]


def affine_augment(image: np.ndarray, rng: np.random.Generator, ranges: AffineRanges = AffineRanges()) -> np.ndarray:
    """One random affine view: scale, rotation, translation."""
    _, h, w = image.shape
    scale = rng.uniform(ranges.scale[0], ranges.scale[1])
    rotation = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg)
    ty = rng.uniform(-ranges.translate_frac, ranges.translate_frac) * h
    tx = rng.uniform(-ranges.translate_frac, ranges.translate_frac) * w
    return apply_affine(image, scale, rotation, ty, tx)


def augmented_epoch(
    samples: list[Sample],
    views: int,
    seed: int,
    epoch: int,
    ranges: AffineRanges = AffineRanges(),
):
    """Yield ``views`` affine views of every sample, deterministically.

    The stream depends only on (seed, epoch, sample id, view index), so two
    schemes trained on the same split see identical augmented data.
    """
    for s in samples:
        for v in range(views):
            rng = derive_rng(seed, "affine", epoch, s.id, v)
            yield affine_augment(s.image, rng, ranges), s.target, s.label


# -- folds ----------------------------------------------------------------------------


@dataclass
class FoldPlan:
    """Stratified fold assignment plus per-fold train/val/test id sets."""

    k: int
    assignments: dict[int, int]
    val_fraction: float
    folds: list[dict[str, list[int]]] = field(default_factory=list)

    def fold_ids(self, fold: int) -> tuple[list[int], list[int], list[int]]:
        f = self.folds[fold]
        return f["train"], f["val"], f["test"]


def kfold_split(dataset: Dataset, k: int = 3, seed: int = 0, val_fraction: float = 0.30) -> FoldPlan:
    """Stratified k-fold plan with a stratified validation share.

    Fold i's test set is fold i; the remaining samples are split
    (1 - val_fraction)/val_fraction into train/val, per class. Per-class
    fold sizes differ by at most one.
    """
    if k < 2:
        raise ValidationError(f"k-fold needs k >= 2, got {k}")
    if not 0.0 < val_fraction < 1.0:
        raise ValidationError(f"val_fraction must be in (0, 1), got {val_fraction}")
    groups = dataset.by_class()
    for label, members in groups.items():
        if len(members) < k:
            raise DataError(
                f"class {dataset.class_names[label]!r} has {len(members)} samples, fewer than k={k}"
            )
    assignments: dict[int, int] = {}
    for label in sorted(groups):
        ids = sorted(s.id for s in groups[label])
        rng = derive_rng(seed, "fold", label)
        ids = [ids[i] for i in rng.permutation(len(ids))]
        for pos, sid in enumerate(ids):
            assignments[sid] = pos % k

    folds = []
    for fold in range(k):
        test = sorted(sid for sid, f in assignments.items() if f == fold)
        train: list[int] = []
        val: list[int] = []
        for label in sorted(groups):
            rest = sorted(s.id for s in groups[label] if assignments[s.id] != fold)
            rng = derive_rng(seed, "val-split", fold, label)
            rest = [rest[i] for i in rng.permutation(len(rest))]
            n_val = int(round(val_fraction * len(rest)))
            val.extend(rest[:n_val])
            train.extend(rest[n_val:])
        folds.append({"train": sorted(train), "val": sorted(val), "test": test})
    return FoldPlan(k=k, assignments=assignments, val_fraction=val_fraction, folds=folds)


# -- FFDS file format ----------------------------------------------------------------
#
# magic "FFDS" | version u16 | sample_count u32 | H u16 | W u16 | class_count u16
# per class name: byte length u16 | UTF-8 bytes
# per sample: id u64 | label u8 | target class_count x f32 | image H*W f32 row-major
# All integers and floats little-endian.


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"truncated file while reading {what}", offset=self.pos)
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def save_dataset(dataset: Dataset, path):
    dataset.validate()
    parts = [FFDS_MAGIC, struct.pack("<HIHHH", FFDS_VERSION, len(dataset.samples), dataset.image_size, dataset.image_size, dataset.class_count)]
    for name in dataset.class_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    for s in dataset.samples:
        parts.append(struct.pack("<QB", s.id, s.label))
        parts.append(np.asarray(s.target, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(s.image, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != FFDS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FFDS_MAGIC!r}", offset=0)
    (version,) = r.unpack("<H", "version")
    if version != FFDS_VERSION:
        raise VersionError(f"unsupported dataset version {version}", offset=4)
    count, h, w, class_count = r.unpack("<IHHH", "header")
    names = []
    for _ in range(class_count):
        (ln,) = r.unpack("<H", "class name length")
        names.append(r.take(ln, "class name").decode("utf-8"))
    samples = []
    for _ in range(count):
        sid, label = r.unpack("<QB", "sample header")
        target = np.frombuffer(r.take(4 * class_count, "target"), dtype="<f4").copy()
        image = np.frombuffer(r.take(4 * h * w, "image"), dtype="<f4").copy().reshape(1, h, w)
        samples.append(Sample(image, int(label), target, int(sid)))
    if r.pos != len(blob):
        raise FormatError(f"{len(blob) - r.pos} trailing bytes", offset=r.pos)
    if h != w:
        raise FormatError("only square images are supported", offset=6)
    ds = Dataset(samples, tuple(names), int(h))
    ds.validate()
    return ds

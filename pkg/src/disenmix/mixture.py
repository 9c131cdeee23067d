"""Synthetic samples from mixtures of class-specified codes.

Once the encoders are trained, every training image splits into a
specified code c (class appearance) and an unspecified code r (everything
else). New samples come from decoding a fixed r together with a convex
combination of c vectors: the sample's own c plus, for every other class,
the training-set c closest to it in L2. Nearby codes from different
classes produce images that are hard to tell apart, and the classification
target is simply the mixing proportions.

Swapping is the degenerate case: all weight on one foreign c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Sample
from .errors import DataError, ValidationError
from .models import ClassifierHead, Decoder, Encoder
from .tensor import Tensor, concat, no_grad

SIMPLEX_TOL = 1e-9


def _check_proportions(props: np.ndarray, what: str = "proportions"):
    if np.any(props < -SIMPLEX_TOL):
        raise ValidationError(f"{what} must be nonnegative")
    if abs(float(props.sum()) - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"{what} must sum to 1, got {props.sum()!r}")


@dataclass
class SoftTarget:
    """Probability vector over the classes."""

    probs: np.ndarray

    def __post_init__(self):
        # validate at the precision the values were produced in, then store f32
        _check_proportions(np.asarray(self.probs, dtype=np.float64), "soft target")
        self.probs = np.asarray(self.probs, dtype=np.float32)


@dataclass
class MixtureSpec:
    """Everything needed to render one synthetic sample."""

    components: list[tuple[int, np.ndarray, float]]  # (class id, c vector, proportion)
    r_source: int  # sample id providing the unspecified code

    def validate(self, own_class: int):
        classes = [c for c, _, _ in self.components]
        if len(set(classes)) != len(classes):
            raise ValidationError("mixture component classes must be distinct")
        if own_class not in classes:
            raise ValidationError("mixture must include the source sample's own class")
        _check_proportions(np.array([p for _, _, p in self.components], dtype=np.float64))


class CodeBank:
    """Per-class specified codes extracted from one training split."""

    def __init__(self, entries: dict[int, list[tuple[int, np.ndarray]]], code_dim: int):
        self.entries = entries
        self.code_dim = code_dim

    def classes(self) -> list[int]:
        return sorted(self.entries)

    def size(self, label: int) -> int:
        return len(self.entries.get(label, []))

    def sample_ids(self) -> set[int]:
        return {sid for rows in self.entries.values() for sid, _ in rows}


def build_code_bank(train: Dataset, e_c: Encoder, batch_size: int = 128) -> CodeBank:
    """Encode every training sample and group the codes by class."""
    if len(train) == 0:
        raise DataError("cannot build a code bank from an empty split")
    images = train.images()
    codes = []
    with no_grad():
        for i in range(0, len(images), batch_size):
            codes.append(e_c.forward(Tensor(images[i : i + batch_size])).data)
    codes = np.concatenate(codes, axis=0)
    entries: dict[int, list[tuple[int, np.ndarray]]] = {c: [] for c in range(train.class_count)}
    for sample, code in zip(train.samples, codes):
        entries[sample.label].append((sample.id, code))
    for label, rows in entries.items():
        if not rows:
            raise DataError(f"class {train.class_names[label]!r} has no samples in the training split")
        rows.sort(key=lambda row: row[0])
    return CodeBank(entries, codes.shape[1])


def swap_codes(x: np.ndarray, y: np.ndarray, e_c: Encoder, e_r: Encoder, g_r: Decoder) -> np.ndarray:
    """Decode x's unspecified code with y's specified code (eval mode)."""
    with no_grad():
        c = e_c.forward(Tensor(np.asarray(y, dtype=np.float32)))
        r = e_r.forward(Tensor(np.asarray(x, dtype=np.float32)))
        return g_r.forward(concat(c, r), mode="eval").data


def nearest_cross_class_codes(
    c: np.ndarray,
    source_class: int,
    bank: CodeBank,
    top_k: int = 1,
    rng: np.random.Generator | None = None,
) -> list[tuple[int, np.ndarray]]:
    """For every other class, the bank code closest to ``c`` in L2.

    Ties break toward the lowest sample id (bank rows are id-sorted, and
    the scan keeps the first minimum). With ``top_k > 1`` one of the k
    nearest codes is chosen uniformly instead, which needs an ``rng``.
    """
    c = np.asarray(c, dtype=np.float32)
    if top_k < 1:
        raise ValidationError(f"top_k must be positive, got {top_k}")
    if top_k > 1 and rng is None:
        raise ValidationError("top_k > 1 needs an rng to pick among the candidates")
    out = []
    for label in bank.classes():
        if label == source_class:
            continue
        rows = bank.entries.get(label, [])
        if not rows:
            raise DataError(f"code bank has no entries for class {label}")
        mat = np.stack([code for _, code in rows])
        d2 = ((mat - c) ** 2).sum(axis=1)
        if top_k == 1:
            best = int(np.argmin(d2))  # argmin returns the first (lowest-id) minimum
        else:
            order = np.lexsort((np.arange(len(rows)), d2))
            best = int(rng.choice(order[: min(top_k, len(rows))]))
        out.append((label, rows[best][1]))
    return out


def sample_proportions(k: int, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    """Symmetric Dirichlet(alpha) draw over k components."""
    if k < 1:
        raise ValidationError(f"need at least one component, got {k}")
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    if k == 1:
        return np.ones(1)
    props = rng.dirichlet(np.full(k, float(alpha)))
    return props / props.sum()


def mix_codes(components: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Convex combination of code vectors."""
    props = np.array([p for _, p in components], dtype=np.float64)
    _check_proportions(props)
    dims = {np.asarray(c).shape for c, _ in components}
    if len(dims) != 1:
        raise ValidationError(f"all codes must share one length, got {sorted(dims)}")
    first_code, first_p = components[0]
    mixed = np.asarray(first_code, dtype=np.float32) * np.float32(first_p)
    for code, p in components[1:]:
        mixed = mixed + np.asarray(code, dtype=np.float32) * np.float32(p)
    return mixed


def mixture_target(classes: list[int], proportions: np.ndarray, class_count: int) -> SoftTarget:
    """Target vector holding each class's share of the mixture."""
    if len(classes) != len(proportions):
        raise ValidationError("classes and proportions must have equal length")
    if len(set(classes)) != len(classes):
        raise ValidationError(f"duplicate class in mixture: {classes}")
    probs = np.zeros(class_count, dtype=np.float64)
    for cls, p in zip(classes, proportions):
        if not 0 <= cls < class_count:
            raise ValidationError(f"class id {cls} out of range")
        probs[cls] = p
    return SoftTarget(probs)


def plan_mixture(
    sample: Sample,
    bank: CodeBank,
    e_c: Encoder,
    rng: np.random.Generator,
    alpha: float = 1.0,
    proportions: np.ndarray | None = None,
    top_k: int = 1,
) -> MixtureSpec:
    """Choose components and proportions for one synthetic sample.

    The sample's own specified code always participates, listed first;
    ``proportions`` overrides the Dirichlet draw (component order: own
    class, then the other classes ascending).
    """
    with no_grad():
        own_c = e_c.forward(Tensor(sample.image)).data
    neighbors = nearest_cross_class_codes(own_c, sample.label, bank, top_k=top_k, rng=rng)
    classes = [sample.label] + [cls for cls, _ in neighbors]
    codes = [own_c] + [code for _, code in neighbors]
    if proportions is None:
        props = sample_proportions(len(classes), rng, alpha)
    else:
        props = np.asarray(proportions, dtype=np.float64)
        if len(props) != len(classes):
            raise ValidationError(f"expected {len(classes)} proportions, got {len(props)}")
        _check_proportions(props)
    spec = MixtureSpec(
        components=[(cls, code, float(p)) for cls, code, p in zip(classes, codes, props)],
        r_source=sample.id,
    )
    spec.validate(sample.label)
    return spec


def synthesize_mixture_sample(
    sample: Sample,
    bank: CodeBank,
    e_c: Encoder,
    e_r: Encoder,
    g_r: Decoder,
    rng: np.random.Generator,
    alpha: float = 1.0,
    proportions: np.ndarray | None = None,
    top_k: int = 1,
) -> tuple[np.ndarray, SoftTarget]:
    """Render one synthetic (image, soft target) pair for ``sample``."""
    spec = plan_mixture(sample, bank, e_c, rng, alpha=alpha, proportions=proportions, top_k=top_k)
    c_mix = mix_codes([(code, p) for _, code, p in spec.components])
    with no_grad():
        r = e_r.forward(Tensor(sample.image)).data
        image = g_r.forward(concat(Tensor(c_mix), Tensor(r)), mode="eval").data
    target = mixture_target(
        [cls for cls, _, _ in spec.components],
        [p for _, _, p in spec.components],
        bank_class_count(bank),
    )
    return image, target


def bank_class_count(bank: CodeBank) -> int:
    return len(bank.entries)


def synthesize_batch(
    samples: list[Sample],
    bank: CodeBank,
    e_c: Encoder,
    e_r: Encoder,
    g_r: Decoder,
    seed: int,
    epoch: int,
    alpha: float = 1.0,
    per_sample: int = 1,
    top_k: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Mixture samples for a whole split, ``per_sample`` per real sample.

    Each draw uses its own derived stream, so the batch is deterministic
    and order-independent.
    """
    from .seeding import derive_rng

    images = []
    targets = []
    for s in samples:
        for j in range(per_sample):
            rng = derive_rng(seed, "mixture", epoch, s.id, j)
            img, tgt = synthesize_mixture_sample(s, bank, e_c, e_r, g_r, rng, alpha=alpha, top_k=top_k)
            images.append(img)
            targets.append(tgt.probs)
    return np.stack(images), np.stack(targets)

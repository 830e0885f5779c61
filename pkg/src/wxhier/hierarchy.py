"""Two-level classifier: coarse 3-way routing into per-group sub-models.

The primary model picks Rainy / Dusty / Cold from the whole image; the
matching sub-model then picks the leaf class among that group's leaves.
Cold images additionally get a 2-way safety verdict from a dedicated
model; for the other routes safety falls back to the taxonomy map, since
only the cold branch carries a trained safety head.  Routing is hard
argmax everywhere, ties toward the lowest index.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ManifestEntry
from .errors import FormatError, MissingClassError, ValidationError, VersionError
from .imageio import ImageU8, bgr_to_rgb, decode_ppm, to_tensor
from .preprocess import (
    NormalizationStats,
    compute_stats,
    load_stats,
    normalize,
    preprocess_pipeline,
    resize_lanczos,
    save_stats,
)
from .nn import (
    ModelSpec,
    Params,
    TrainConfig,
    basic_cnn_spec,
    forward_pass,
    init_params,
    load_model,
    save_model,
    train,
)
from .nn.train import EpochStats
from .taxonomy import (
    COARSE_GROUPS,
    LEAF_CLASSES,
    LEAF_INDEX,
    Taxonomy,
    group_of,
    leaves_of,
    load_taxonomy,
    safety_of,
    serialize_taxonomy,
)

SAFETY_MODEL_CLASSES = ("Safe", "PotentiallyHazardous")

# bundle roles in pinned order; also the hash and training order
MODEL_ROLES = ("primary", "sub_rainy", "sub_dusty", "sub_cold_fine", "sub_cold_safety")

BUNDLE_VERSION = 1


@dataclass(frozen=True)
class SubModel:
    spec: ModelSpec
    params: Params
    classes: tuple[str, ...]  # output index -> label name

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.spec.n_out != len(self.classes):
            raise ValidationError(
                f"model emits {self.spec.n_out} classes but {len(self.classes)} names given"
            )


@dataclass(frozen=True)
class HierarchicalModel:
    primary: SubModel
    sub_rainy: SubModel
    sub_dusty: SubModel
    sub_cold_fine: SubModel
    sub_cold_safety: SubModel
    taxonomy: Taxonomy
    stats: NormalizationStats

    def __post_init__(self):
        if self.primary.classes != COARSE_GROUPS:
            raise ValidationError(f"primary classes must be {COARSE_GROUPS}")
        for group, sub in (
            ("Rainy", self.sub_rainy),
            ("Dusty", self.sub_dusty),
            ("Cold", self.sub_cold_fine),
        ):
            want = tuple(leaves_of(group, self.taxonomy))
            if sub.classes != want:
                raise ValidationError(f"{group} sub-model classes {sub.classes} != {want}")
        if self.sub_cold_safety.classes != SAFETY_MODEL_CLASSES:
            raise ValidationError(f"cold-safety classes must be {SAFETY_MODEL_CLASSES}")

    def sub_for_group(self, group: str) -> SubModel:
        return {
            "Rainy": self.sub_rainy,
            "Dusty": self.sub_dusty,
            "Cold": self.sub_cold_fine,
        }[group]

    @property
    def input_hw(self) -> tuple[int, int]:
        return self.primary.spec.input_shape[:2]


@dataclass(frozen=True)
class HierPrediction:
    group: str
    group_probs: np.ndarray  # over COARSE_GROUPS
    leaf: str
    leaf_probs: np.ndarray  # over the routed sub-model's classes
    safety: str
    safety_source: str  # "taxonomy" or "cold_model"
    safety_probs: np.ndarray | None  # cold routes only


# ---------------------------------------------------------------- prediction

def _probs(sub: SubModel, x: np.ndarray) -> np.ndarray:
    out, _ = forward_pass(sub.spec, sub.params, x, mode="infer")
    return out


def predict_batch(model: HierarchicalModel, x: np.ndarray) -> list[HierPrediction]:
    """Hard-routed predictions for a batch of preprocessed (N,H,W,C) tensors.

    Each sub-model runs once on the slice of the batch routed to it, so
    results are identical to one-at-a-time prediction but much cheaper.
    """
    n = x.shape[0]
    group_probs = _probs(model.primary, x)
    group_idx = group_probs.argmax(axis=1)
    preds: list[HierPrediction | None] = [None] * n
    for gi, group in enumerate(COARSE_GROUPS):
        (rows,) = np.nonzero(group_idx == gi)
        if rows.size == 0:
            continue
        sub = model.sub_for_group(group)
        leaf_probs = _probs(sub, x[rows])
        leaf_idx = leaf_probs.argmax(axis=1)
        if group == "Cold":
            safety_probs = _probs(model.sub_cold_safety, x[rows])
            safety_idx = safety_probs.argmax(axis=1)
        for j, row in enumerate(rows):
            leaf = sub.classes[leaf_idx[j]]
            if group == "Cold":
                safety = SAFETY_MODEL_CLASSES[safety_idx[j]]
                source = "cold_model"
                sprobs = safety_probs[j]
            else:
                safety = safety_of(leaf, model.taxonomy)
                source = "taxonomy"
                sprobs = None
            preds[row] = HierPrediction(
                group, group_probs[row], leaf, leaf_probs[j], safety, source, sprobs
            )
    return preds  # type: ignore[return-value]


def predict_tensor(model: HierarchicalModel, x: np.ndarray) -> HierPrediction:
    """Single preprocessed (H,W,C) tensor -> prediction."""
    return predict_batch(model, x[np.newaxis])[0]


def predict_hierarchical(
    model: HierarchicalModel, image: ImageU8, channel_order: str = "RGB"
) -> HierPrediction:
    """Raw decoded image -> resize + standardize -> routed prediction."""
    x = preprocess_pipeline(image, channel_order, model.stats, model.input_hw)
    return predict_tensor(model, x)


def joint_leaf_batch(model: HierarchicalModel, x: np.ndarray) -> np.ndarray:
    """Soft-routing diagnostic: p(leaf) = sum_g p(g) * p(leaf | g), (N, 11).

    The hard-routed leaf comes from a single sub-model and may differ
    from this distribution's argmax.
    """
    group_probs = _probs(model.primary, x)
    out = np.zeros((x.shape[0], len(LEAF_CLASSES)), dtype=np.float64)
    for gi, group in enumerate(COARSE_GROUPS):
        sub = model.sub_for_group(group)
        leaf_probs = _probs(sub, x)
        for j, leaf in enumerate(sub.classes):
            out[:, LEAF_INDEX[leaf]] += group_probs[:, gi].astype(np.float64) * leaf_probs[
                :, j
            ].astype(np.float64)
    return out


def joint_leaf_distribution(model: HierarchicalModel, x: np.ndarray) -> np.ndarray:
    return joint_leaf_batch(model, x[np.newaxis])[0]


# ------------------------------------------------------------------ training

@dataclass(frozen=True)
class HierTrainConfig:
    input_hw: tuple[int, int] = (100, 100)
    scale: str = "paper"  # basic-CNN scale for all five models
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    dropout: float = 0.25
    seed: int = 0

    def train_config(self, role_index: int) -> TrainConfig:
        # distinct but pinned seed per model
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            seed=self.seed + role_index,
        )


def load_image_tensors(
    entries: list[ManifestEntry], out_hw: tuple[int, int], root: str | Path = "."
) -> np.ndarray:
    """Decode and resize manifest images to a raw 0..255 (N,H,W,3) batch."""
    root = Path(root)
    out = np.empty((len(entries), out_hw[0], out_hw[1], 3), dtype=np.float32)
    for i, entry in enumerate(entries):
        path = Path(entry.path)
        if not path.is_absolute():
            path = root / path
        img = decode_ppm(path.read_bytes())
        if entry.channel_order == "BGR":
            img = bgr_to_rgb(img)
        out[i] = resize_lanczos(to_tensor(img), out_hw[0], out_hw[1])
    return out


def leaf_labels(entries: list[ManifestEntry]) -> np.ndarray:
    return np.array([LEAF_INDEX[e.leaf] for e in entries], dtype=np.int64)


def check_all_leaves_present(entries: list[ManifestEntry]) -> None:
    seen = {e.leaf for e in entries}
    missing = [leaf for leaf in LEAF_CLASSES if leaf not in seen]
    if missing:
        raise MissingClassError(f"training data lacks leaf classes: {', '.join(missing)}")


def train_hierarchical(
    train_entries: list[ManifestEntry],
    taxonomy: Taxonomy,
    cfg: HierTrainConfig,
    val_entries: list[ManifestEntry] | None = None,
    root: str | Path = ".",
) -> tuple[HierarchicalModel, dict[str, list[EpochStats]]]:
    """Train all five models; returns the model and per-role histories.

    The primary model sees every training image with its coarse group as
    the label; each sub-model sees only its group's images.  The cold
    safety model sees the cold images whose taxonomy safety is Safe or
    PotentiallyHazardous (the 2-way head cannot represent a third
    level, so cold leaves mapped to Dangerous are left out of it).  One
    NormalizationStats, computed on the resized training tensors, is
    shared by all five.
    """
    check_all_leaves_present(train_entries)
    val_entries = val_entries or []

    x_train_raw = load_image_tensors(train_entries, cfg.input_hw, root)
    stats = compute_stats(x_train_raw)
    x_train = normalize(x_train_raw, stats)
    del x_train_raw
    x_val = None
    if val_entries:
        x_val = normalize(load_image_tensors(val_entries, cfg.input_hw, root), stats)

    input_shape = (cfg.input_hw[0], cfg.input_hw[1], 3)

    def fit(role_index: int, n_out: int, x, y, xv, yv):
        spec = basic_cnn_spec(input_shape, n_out, scale=cfg.scale, dropout=cfg.dropout)
        params, history = train(spec, x, y, cfg.train_config(role_index), xv, yv)
        return spec, params, history

    histories: dict[str, list[EpochStats]] = {}

    # primary: group labels over the full set
    group_index = {g: i for i, g in enumerate(COARSE_GROUPS)}
    y_group = np.array(
        [group_index[group_of(e.leaf, taxonomy)] for e in train_entries], dtype=np.int64
    )
    yv_group = np.array(
        [group_index[group_of(e.leaf, taxonomy)] for e in val_entries], dtype=np.int64
    )
    spec_p, params_p, histories["primary"] = fit(
        0, len(COARSE_GROUPS), x_train, y_group, x_val, yv_group if val_entries else None
    )
    primary = SubModel(spec_p, params_p, COARSE_GROUPS)

    # per-group sub-models with within-group leaf labels
    subs: dict[str, SubModel] = {}
    for role_index, group in enumerate(COARSE_GROUPS, start=1):
        classes = tuple(leaves_of(group, taxonomy))
        class_pos = {leaf: i for i, leaf in enumerate(classes)}
        rows = np.array(
            [i for i, e in enumerate(train_entries) if e.leaf in class_pos], dtype=np.intp
        )
        y_sub = np.array([class_pos[train_entries[i].leaf] for i in rows], dtype=np.int64)
        vrows = np.array(
            [i for i, e in enumerate(val_entries) if e.leaf in class_pos], dtype=np.intp
        )
        xv_sub = x_val[vrows] if (x_val is not None and vrows.size) else None
        yv_sub = (
            np.array([class_pos[val_entries[i].leaf] for i in vrows], dtype=np.int64)
            if vrows.size
            else None
        )
        role = MODEL_ROLES[role_index]
        spec_s, params_s, histories[role] = fit(
            role_index, len(classes), x_train[rows], y_sub, xv_sub, yv_sub
        )
        subs[group] = SubModel(spec_s, params_s, classes)

    # cold safety head: cold images with a representable safety level
    def safety_rows(entries):
        rows, labels = [], []
        for i, e in enumerate(entries):
            if group_of(e.leaf, taxonomy) != "Cold":
                continue
            safety = safety_of(e.leaf, taxonomy)
            if safety in SAFETY_MODEL_CLASSES:
                rows.append(i)
                labels.append(SAFETY_MODEL_CLASSES.index(safety))
        return np.array(rows, dtype=np.intp), np.array(labels, dtype=np.int64)

    srows, y_safety = safety_rows(train_entries)
    present = set(y_safety.tolist())
    absent = [name for i, name in enumerate(SAFETY_MODEL_CLASSES) if i not in present]
    if absent:
        raise MissingClassError(f"no cold training images with safety: {', '.join(absent)}")
    svrows, yv_safety = safety_rows(val_entries)
    spec_cs, params_cs, histories["sub_cold_safety"] = fit(
        4,
        len(SAFETY_MODEL_CLASSES),
        x_train[srows],
        y_safety,
        x_val[svrows] if (x_val is not None and svrows.size) else None,
        yv_safety if svrows.size else None,
    )

    model = HierarchicalModel(
        primary=primary,
        sub_rainy=subs["Rainy"],
        sub_dusty=subs["Dusty"],
        sub_cold_fine=subs["Cold"],
        sub_cold_safety=SubModel(spec_cs, params_cs, SAFETY_MODEL_CLASSES),
        taxonomy=taxonomy,
        stats=stats,
    )
    return model, histories


def init_hierarchical(
    taxonomy: Taxonomy,
    input_hw: tuple[int, int] = (16, 16),
    scale: str = "micro",
    seed: int = 0,
    stats: NormalizationStats | None = None,
) -> HierarchicalModel:
    """Randomly initialized model (no training); useful for property tests."""
    rng = np.random.default_rng(seed)
    input_shape = (input_hw[0], input_hw[1], 3)
    stats = stats or NormalizationStats(mean=127.5, std=64.0, sample_count=2)

    def make(classes: tuple[str, ...]) -> SubModel:
        spec = basic_cnn_spec(input_shape, len(classes), scale=scale)
        return SubModel(spec, init_params(spec, rng), classes)

    return HierarchicalModel(
        primary=make(COARSE_GROUPS),
        sub_rainy=make(tuple(leaves_of("Rainy", taxonomy))),
        sub_dusty=make(tuple(leaves_of("Dusty", taxonomy))),
        sub_cold_fine=make(tuple(leaves_of("Cold", taxonomy))),
        sub_cold_safety=make(SAFETY_MODEL_CLASSES),
        taxonomy=taxonomy,
        stats=stats,
    )


# ------------------------------------------------------------------- bundles

def _role_sub(model: HierarchicalModel, role: str) -> SubModel:
    return {
        "primary": model.primary,
        "sub_rainy": model.sub_rainy,
        "sub_dusty": model.sub_dusty,
        "sub_cold_fine": model.sub_cold_fine,
        "sub_cold_safety": model.sub_cold_safety,
    }[role]


def save_hierarchical(model: HierarchicalModel, dirpath: str | Path) -> None:
    """Write the bundle directory: five model files, taxonomy, stats, manifest."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    hasher = hashlib.sha256()
    files: dict[str, str] = {}
    for role in MODEL_ROLES:
        sub = _role_sub(model, role)
        fname = f"{role}.wxm1"
        save_model(dirpath / fname, sub.spec, sub.params, model.stats, list(sub.classes))
        files[role] = fname
        hasher.update((dirpath / fname).read_bytes())
    (dirpath / "taxonomy.cfg").write_text(serialize_taxonomy(model.taxonomy))
    hasher.update((dirpath / "taxonomy.cfg").read_bytes())
    save_stats(dirpath / "stats.json", model.stats)
    hasher.update((dirpath / "stats.json").read_bytes())
    manifest = {
        "format": "wxhier-bundle",
        "version": BUNDLE_VERSION,
        "models": files,
        "taxonomy": "taxonomy.cfg",
        "stats": "stats.json",
        "content_hash": hasher.hexdigest(),
    }
    (dirpath / "bundle.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def bundle_content_hash(dirpath: str | Path) -> str:
    """Recompute the digest over the bundle's payload files in pinned order."""
    dirpath = Path(dirpath)
    manifest = _read_bundle_manifest(dirpath)
    hasher = hashlib.sha256()
    for role in MODEL_ROLES:
        hasher.update((dirpath / manifest["models"][role]).read_bytes())
    hasher.update((dirpath / manifest["taxonomy"]).read_bytes())
    hasher.update((dirpath / manifest["stats"]).read_bytes())
    return hasher.hexdigest()


def _read_bundle_manifest(dirpath: Path) -> dict:
    mpath = dirpath / "bundle.json"
    if not mpath.is_file():
        raise FormatError(f"{dirpath}: no bundle.json manifest")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{mpath}: bad JSON: {exc}") from None
    if manifest.get("format") != "wxhier-bundle":
        raise FormatError(f"{mpath}: not a model bundle manifest")
    if manifest.get("version") != BUNDLE_VERSION:
        raise VersionError(f"{mpath}: unsupported bundle version {manifest.get('version')!r}")
    missing = [k for k in ("models", "taxonomy", "stats", "content_hash") if k not in manifest]
    if missing:
        raise FormatError(f"{mpath}: manifest missing keys: {', '.join(missing)}")
    roles = set(manifest["models"])
    if roles != set(MODEL_ROLES):
        raise FormatError(f"{mpath}: model roles {sorted(roles)} != {sorted(MODEL_ROLES)}")
    return manifest


def load_hierarchical(dirpath: str | Path, verify_hash: bool = True) -> HierarchicalModel:
    dirpath = Path(dirpath)
    manifest = _read_bundle_manifest(dirpath)
    if verify_hash and bundle_content_hash(dirpath) != manifest["content_hash"]:
        raise FormatError(f"{dirpath}: bundle content does not match its recorded hash")

    taxonomy = load_taxonomy((dirpath / manifest["taxonomy"]).read_bytes())
    stats = load_stats(dirpath / manifest["stats"])

    subs: dict[str, SubModel] = {}
    for role in MODEL_ROLES:
        spec, params, _, labels = load_model(dirpath / manifest["models"][role])
        if labels is None:
            raise FormatError(f"{role} model file lacks its class-name list")
        subs[role] = SubModel(spec, params, tuple(labels))
    return HierarchicalModel(
        primary=subs["primary"],
        sub_rainy=subs["sub_rainy"],
        sub_dusty=subs["sub_dusty"],
        sub_cold_fine=subs["sub_cold_fine"],
        sub_cold_safety=subs["sub_cold_safety"],
        taxonomy=taxonomy,
        stats=stats,
    )

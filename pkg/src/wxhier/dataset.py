"""Manifest loading, deterministic stratified splitting, class distribution.

The split shuffle uses splitmix64 + Fisher-Yates with unbiased rejection
sampling, fully specified here so the same (manifest, seed) pair produces
bit-identical splits on any platform or implementation:

* stream state advances by adding 0x9E3779B97F4A7C15 (mod 2^64); each
  output mixes the state with xor-shift-multiply constants
  0xBF58476D1CE4E5B9 and 0x94D049BB133111EB (Steele et al.'s splitmix64);
* the per-class stream seed is ``seed XOR ((leaf_index + 1) *
  0x9E3779B97F4A7C15 mod 2^64)``;
* bounded draws below n reject values >= floor(2^64 / n) * n, then reduce
  modulo n;
* Fisher-Yates runs from the last index down to 1, swapping i with
  draw_below(i + 1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import EmptyManifestError, ParseError, UnknownLabelError
from .taxonomy import LEAF_CLASSES, LEAF_INDEX, Taxonomy, group_of

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

CHANNEL_ORDERS = ("RGB", "BGR")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    leaf: str
    channel_order: str = "RGB"


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.30
    val_fraction_of_train: float = 0.20
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "val_fraction_of_train"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParseError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class SplitResult:
    train: list[ManifestEntry]
    val: list[ManifestEntry]
    test: list[ManifestEntry]


class _SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n


def _shuffled(indices: list[int], rng: _SplitMix64) -> list[int]:
    out = list(indices)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def load_manifest(data: bytes | str) -> list[ManifestEntry]:
    """Parse a manifest CSV with header ``path,label[,channel_order]``."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"manifest is not UTF-8: {exc}") from None
    rows = list(csv.reader(io.StringIO(data)))
    rows = [r for r in rows if r]  # ignore blank lines
    if not rows:
        raise ParseError("empty manifest: missing header")
    header = [c.strip() for c in rows[0]]
    if header not in (["path", "label"], ["path", "label", "channel_order"]):
        raise ParseError(f"bad manifest header {header!r}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} columns, got {len(row)}")
        path = row[0].strip()
        label = row[1].strip()
        if not path:
            raise ParseError(f"line {lineno}: empty path")
        if label not in LEAF_INDEX:
            raise UnknownLabelError(f"line {lineno}: unknown label {label!r}")
        order = row[2].strip() if len(row) == 3 else "RGB"
        if order not in CHANNEL_ORDERS:
            raise ParseError(f"line {lineno}: unknown channel order {order!r}")
        entries.append(ManifestEntry(path, label, order))
    return entries


def manifest_to_csv(entries: list[ManifestEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "label", "channel_order"])
    for e in entries:
        writer.writerow([e.path, e.leaf, e.channel_order])
    return buf.getvalue()


def stratified_split(entries: list[ManifestEntry], spec: SplitSpec) -> SplitResult:
    """Per-class seeded shuffle, then floor-sized test and val cuts.

    Per class of size n: floor(n * test_fraction) entries go to test, the
    remainder form the train pool; floor(pool * val_fraction_of_train) go
    to val, the rest to train.  Output lists keep the original manifest
    order.  Deterministic given (entries order, seed).
    """
    if not entries:
        raise EmptyManifestError("cannot split an empty manifest")
    # Fractions come in as decimal literals (0.30, 0.20); exact rational
    # arithmetic keeps floor(10 * 0.3) == 3 instead of flooring a float
    # that landed just below the true product.
    test_frac = Fraction(str(spec.test_fraction))
    val_frac = Fraction(str(spec.val_fraction_of_train))
    train_idx: list[int] = []
    val_idx: list[int] = []
    test_idx: list[int] = []
    for leaf in LEAF_CLASSES:
        cls = [i for i, e in enumerate(entries) if e.leaf == leaf]
        if not cls:
            continue
        rng = _SplitMix64(spec.seed ^ (((LEAF_INDEX[leaf] + 1) * _GOLDEN) & _MASK64))
        order = _shuffled(cls, rng)
        n_test = int(len(order) * test_frac)
        test_idx += order[:n_test]
        pool = order[n_test:]
        n_val = int(len(pool) * val_frac)
        val_idx += pool[:n_val]
        train_idx += pool[n_val:]
    return SplitResult(
        train=[entries[i] for i in sorted(train_idx)],
        val=[entries[i] for i in sorted(val_idx)],
        test=[entries[i] for i in sorted(test_idx)],
    )


@dataclass(frozen=True)
class Distribution:
    per_leaf: dict[str, int]
    per_group: dict[str, int]
    total: int


def class_distribution(entries: list[ManifestEntry], taxonomy: Taxonomy) -> Distribution:
    per_leaf = {leaf: 0 for leaf in LEAF_CLASSES}
    for e in entries:
        per_leaf[e.leaf] += 1
    per_group = {g: 0 for g in ("Rainy", "Dusty", "Cold")}
    for leaf, count in per_leaf.items():
        per_group[group_of(leaf, taxonomy)] += count
    return Distribution(per_leaf, per_group, len(entries))


def subset_for_group(
    entries: list[ManifestEntry], taxonomy: Taxonomy, group: str
) -> list[ManifestEntry]:
    """Entries whose leaf maps to ``group``, original order preserved."""
    return [e for e in entries if group_of(e.leaf, taxonomy) == group]


def distribution_csv(splits: dict[str, list[ManifestEntry]], taxonomy: Taxonomy) -> str:
    """Report rows ``leaf,count,group,split`` for external plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["leaf", "count", "group", "split"])
    for split_name, entries in splits.items():
        dist = class_distribution(entries, taxonomy)
        for leaf in LEAF_CLASSES:
            writer.writerow([leaf, dist.per_leaf[leaf], group_of(leaf, taxonomy), split_name])
    return buf.getvalue()

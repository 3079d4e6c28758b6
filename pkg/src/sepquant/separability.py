"""Per-layer class-separability scoring of pooled feature maps.

Features play the role of words and sampled images the role of documents: a
feature counts as a word for an image when it deviates from that image's
feature mean by at least one standard deviation. A masked term-frequency and
a smoothed inverse-document-frequency then combine into one scalar per layer
(``alpha``), later mapped to a layer importance for bit allocation.

All arithmetic runs in float64 regardless of the (float32) container dtype.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Guards division by an all-zero (or cancelling) column sum in the masked TF.
TF_EPSILON = 1e-12


@dataclass(frozen=True)
class PooledFeatures:
    """Spatially pooled feature maps of one layer.

    ``values`` has one row per output channel (feature) and one column per
    sampled image.
    """

    layer_id: str
    values: np.ndarray  # (feature_count, image_count), float64
    image_ids: list[int] = field(default_factory=list)
    class_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"{self.layer_id}: pooled values must be 2-D")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"{self.layer_id}: need at least one feature and one image")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.layer_id}: pooled values must be finite")

    @property
    def feature_count(self) -> int:
        return self.values.shape[0]

    @property
    def image_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WordSets:
    """Per-feature image sets: mask[i, j] is True when image j counts as a
    word occurrence of feature i."""

    mask: np.ndarray  # bool (feature_count, image_count)
    image_count: int

    @property
    def word_counts(self) -> np.ndarray:
        """Number of images in each feature's word set."""
        return self.mask.sum(axis=1)

    @property
    def total_words(self) -> int:
        return int(self.mask.sum())

    def index_sets(self) -> list[tuple[int, ...]]:
        """Explicit per-feature image index sets (sorted tuples)."""
        return [tuple(np.nonzero(row)[0].tolist()) for row in self.mask]


@dataclass(frozen=True)
class LayerScore:
    layer_id: str
    tf: np.ndarray  # masked term frequency, (feature_count, image_count)
    idf: np.ndarray  # (feature_count,)
    tfidf: np.ndarray  # tf * idf per row
    words: WordSets
    alpha: float


def pool_features(
    feature_map: np.ndarray,
    layer_id: str,
    image_ids: list[int] | None = None,
    class_ids: list[int] | None = None,
) -> PooledFeatures:
    """Global average pool an (images, channels, h, w) feature map down to one
    value per channel per image."""
    fmap = np.asarray(feature_map)
    if fmap.ndim != 4:
        raise ValueError(f"{layer_id}: expected 4-D (n, c, h, w) feature map, got {fmap.ndim}-D")
    pooled = fmap.astype(np.float64).mean(axis=(2, 3)).T  # (c, n)
    return PooledFeatures(
        layer_id=layer_id,
        values=pooled,
        image_ids=list(image_ids) if image_ids is not None else list(range(fmap.shape[0])),
        class_ids=list(class_ids) if class_ids is not None else [],
    )


def select_words(pooled: PooledFeatures) -> WordSets:
    """Mark feature i as a word for image j when it deviates from image j's
    feature mean by at least one (population) standard deviation.

    A zero-variance column selects every feature, since the comparison is >=.
    """
    values = pooled.values
    col_mean = values.mean(axis=0)
    col_std = values.std(axis=0)
    mask = np.abs(values - col_mean) >= col_std
    return WordSets(mask=mask, image_count=pooled.image_count)


def term_frequency(pooled: PooledFeatures, words: WordSets) -> np.ndarray:
    """Masked term frequency: each word's value over the image's total feature
    mass. The denominator sums all features of the image, masked or not."""
    values = pooled.values
    if words.mask.shape != values.shape:
        raise ValueError(
            f"{pooled.layer_id}: word mask shape {words.mask.shape} != values {values.shape}"
        )
    denom = values.sum(axis=0) + TF_EPSILON
    return np.where(words.mask, values, 0.0) / denom


def inverse_document_frequency(words: WordSets) -> np.ndarray:
    """Smoothed IDF per feature: ln((1 + images) / (1 + word-set size))."""
    counts = words.word_counts
    return np.log((1.0 + words.image_count) / (1.0 + counts))


def layer_tfidf(tf: np.ndarray, idf: np.ndarray) -> np.ndarray:
    """Elementwise product of the masked TF matrix with the per-feature IDF."""
    if tf.shape[0] != idf.shape[0]:
        raise ValueError(f"tf has {tf.shape[0]} features but idf has {idf.shape[0]}")
    return tf * idf[:, None]


def layer_separability(tfidf: np.ndarray, words: WordSets) -> float:
    """Layer separability: total TF-IDF mass normalized by the number of word
    occurrences in the layer (guarded for wordless layers)."""
    if tfidf.shape != words.mask.shape:
        raise ValueError(f"tfidf shape {tfidf.shape} != word mask {words.mask.shape}")
    return float(tfidf.sum()) / max(1, words.total_words)


def score_layer(pooled: PooledFeatures) -> LayerScore:
    """Run the full word-selection / TF / IDF / separability chain for one
    layer."""
    words = select_words(pooled)
    tf = term_frequency(pooled, words)
    idf = inverse_document_frequency(words)
    tfidf = layer_tfidf(tf, idf)
    alpha = layer_separability(tfidf, words)
    return LayerScore(
        layer_id=pooled.layer_id, tf=tf, idf=idf, tfidf=tfidf, words=words, alpha=alpha
    )


def classic_tfidf(term_counts: np.ndarray) -> np.ndarray:
    """Reference TF-IDF on a (terms, documents) count matrix.

    TF is the within-document frequency; IDF is log10 of corpus size over a
    smoothed document frequency, so a term present in every document gets a
    slightly negative score.
    """
    counts = np.asarray(term_counts, dtype=np.float64)
    if counts.ndim != 2:
        raise ValueError("term counts must be 2-D (terms, documents)")
    if np.any(counts < 0):
        raise ValueError("term counts must be nonnegative")
    col_sums = counts.sum(axis=0)
    if np.any(col_sums == 0):
        empty = np.nonzero(col_sums == 0)[0]
        raise ValueError(f"empty document(s) at column(s) {empty.tolist()}")
    tf = counts / col_sums
    doc_freq = (counts > 0).sum(axis=1)
    idf = np.log10(counts.shape[1] / (1.0 + doc_freq))
    return tf * idf[:, None]

"""Dataset ingestion: MNIST IDX files, plain-text corpora, and deterministic
synthetic fallbacks so the test suite and CI never need a download.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


@dataclass(frozen=True)
class Dataset:
    kind: str  # "image_labels" | "text_chars"
    images: np.ndarray | None = None  # (N, 28, 28) f32 in [0, 1]
    labels: np.ndarray | None = None  # (N,) int64
    stream: np.ndarray | None = None  # (M,) int64 vocab indices
    vocab: dict | None = None  # char -> index, indices dense from 0

    @property
    def n_items(self) -> int:
        if self.kind == "image_labels":
            return int(self.images.shape[0])
        return int(self.stream.shape[0])


def _read_idx_header(buf, path, expected_magic, n_dims):
    need = 4 * (1 + n_dims)
    if len(buf) < need:
        raise DataError(f"{path}: truncated IDX header ({len(buf)} bytes)")
    magic = struct.unpack(">I", buf[:4])[0]
    if magic != expected_magic:
        raise DataError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(f">{n_dims}I", buf[4:need])
    return dims, buf[need:]


def load_mnist_idx(images_path, labels_path, limit: int | None = None) -> Dataset:
    """Parse the big-endian IDX pair into normalized f32 images + labels."""
    with open(images_path, "rb") as fh:
        img_buf = fh.read()
    with open(labels_path, "rb") as fh:
        lab_buf = fh.read()

    (n_img, rows, cols), img_payload = _read_idx_header(
        img_buf, images_path, IDX_MAGIC_IMAGES, 3)
    (n_lab,), lab_payload = _read_idx_header(
        lab_buf, labels_path, IDX_MAGIC_LABELS, 1)

    if n_img != n_lab:
        raise DataError(
            f"image/label count mismatch: {n_img} images vs {n_lab} labels")
    if len(img_payload) < n_img * rows * cols:
        raise DataError(f"{images_path}: truncated payload "
                        f"({len(img_payload)} < {n_img * rows * cols} bytes)")
    if len(lab_payload) < n_lab:
        raise DataError(f"{labels_path}: truncated payload")

    n = n_img if limit is None else min(n_img, int(limit))
    images = np.frombuffer(
        img_payload[: n * rows * cols], dtype=np.uint8
    ).reshape(n, rows, cols).astype(np.float32) / np.float32(255.0)
    labels = np.frombuffer(lab_payload[:n], dtype=np.uint8).astype(np.int64)
    return Dataset(kind="image_labels", images=images, labels=labels)


def load_text_corpus(path, limit_chars: int | None = None) -> Dataset:
    """Character stream with a vocab built from the distinct characters
    present, ordered ascending by codepoint."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if limit_chars is not None:
        text = text[: int(limit_chars)]
    if not text:
        raise DataError(f"{path}: empty text corpus")
    return _text_dataset(text)


def _text_dataset(text: str) -> Dataset:
    chars = sorted(set(text))
    vocab = {c: i for i, c in enumerate(chars)}
    stream = np.fromiter((vocab[c] for c in text), dtype=np.int64, count=len(text))
    return Dataset(kind="text_chars", stream=stream, vocab=vocab)


def synthetic_mnist(seed: int, n: int, noise: float = 0.02) -> Dataset:
    """Class-templated noisy images: ten fixed smooth templates (per seed)
    plus per-sample noise, so a classifier or autoencoder has real structure
    to learn while staying fully offline and deterministic.

    noise is kept small by default: an autoencoder's reconstruction floor is
    ~784 * noise^2, and a large floor hides the systematic differences
    between activation variants that the harness exists to measure."""
    if n < 1:
        raise DataError(f"need n >= 1 synthetic items, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([77001, int(seed)]))
    # low-res random patterns upsampled 4x -> smooth 28x28 class templates
    base = rng.random((10, 7, 7))
    templates = np.repeat(np.repeat(base, 4, axis=1), 4, axis=2)
    labels = rng.integers(0, 10, size=n)
    jitter = rng.normal(0.0, noise, size=(n, 28, 28))
    images = np.clip(templates[labels] * 0.8 + 0.1 + jitter, 0.0, 1.0)
    return Dataset(kind="image_labels",
                   images=images.astype(np.float32),
                   labels=labels.astype(np.int64))


_SYNTH_ALPHABET = "abcdefghij .\n"


def synthetic_text(seed: int, n: int) -> Dataset:
    """Markov-generated character stream over a small alphabet; the chain's
    transition structure gives an LSTM something better than noise to model."""
    if n < 1:
        raise DataError(f"need n >= 1 synthetic chars, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([77002, int(seed)]))
    k = len(_SYNTH_ALPHABET)
    # sparse-ish random transition rows, renormalized
    trans = rng.random((k, k)) ** 3
    trans /= trans.sum(axis=1, keepdims=True)
    state = int(rng.integers(0, k))
    out = []
    for _ in range(n):
        out.append(_SYNTH_ALPHABET[state])
        state = int(rng.choice(k, p=trans[state]))
    return _text_dataset("".join(out))


def batch_order(n: int, batch_size: int, seed: int, epoch: int) -> list:
    """Deterministic per-epoch shuffle, chunked into index arrays."""
    rng = np.random.default_rng(np.random.SeedSequence([77003, int(seed), int(epoch)]))
    idx = rng.permutation(n)
    if n <= batch_size:
        return [idx]
    # constant batch shapes (trailing remainder dropped) keep step timing flat
    return [idx[i: i + batch_size] for i in range(0, n - batch_size + 1, batch_size)]

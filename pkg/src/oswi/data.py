"""IDX ingestion for MNIST / Fashion-MNIST, seeded subsets and validation splits.

Nothing here touches the network except :func:`fetch`, which only runs when
asked to.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import os
import struct
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as _rng
from .errors import BadMagic, ChecksumMismatch, CountMismatch, DatasetError, TooLarge, TruncatedFile

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
N_CLASSES = 10

FILES = {
    "train": ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    "test": ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
}

MIRRORS = {
    "mnist": [
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
        "http://yann.lecun.com/exdb/mnist/",
    ],
    "fmnist": [
        "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
    ],
}

# Published MD5 digests of the distributed archives.  They anchor the first
# download; its SHA-256 is then recorded in the manifest and used thereafter.
KNOWN_MD5 = {
    "mnist": {
        "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
        "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
        "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
        "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
    },
    "fmnist": {
        "train-images-idx3-ubyte.gz": "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
        "train-labels-idx1-ubyte.gz": "25c81989df183df01b3e8a0aad5dffbe",
        "t10k-images-idx3-ubyte.gz": "bef4ecab320f06d8554ea6380940ec79",
        "t10k-labels-idx1-ubyte.gz": "bb300cfdad3c16e7a12a480ee83cd310",
    },
}

MANIFEST_NAME = "checksums.json"


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (n, 784) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64
    name: str = ""

    def __post_init__(self):
        if self.images.ndim != 2 or self.labels.shape != (self.images.shape[0],):
            raise CountMismatch("images and labels disagree on the sample count")

    def __len__(self):
        return len(self.labels)

    def take(self, idx, name=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], name or self.name)


def data_dir(override=None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get("OSWI_DATA_DIR")
    return Path(env) if env else Path.home() / ".cache" / "oswi"


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (EOFError, gzip.BadGzipFile) as exc:
            raise TruncatedFile(f"{path}: corrupt or truncated gzip stream") from exc
    return raw


def _header(buf, path, magic, n_dims):
    size = 4 * (1 + n_dims)
    if len(buf) >= 4 and (found := struct.unpack(">I", buf[:4])[0]) != magic:
        raise BadMagic(f"{path}: magic {found:#010x}, expected {magic:#010x}")
    if len(buf) < size:
        raise TruncatedFile(f"{path}: header too short")
    return struct.unpack(f">{n_dims}I", buf[4:size]), size


def read_idx_images(path) -> np.ndarray:
    buf = _read_bytes(path)
    (count, rows, cols), off = _header(buf, path, IMAGE_MAGIC, 3)
    need = count * rows * cols
    if len(buf) - off < need:
        raise TruncatedFile(f"{path}: expected {need} pixel bytes, found {len(buf) - off}")
    return np.frombuffer(buf, dtype=np.uint8, count=need, offset=off).reshape(count, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _read_bytes(path)
    (count,), off = _header(buf, path, LABEL_MAGIC, 1)
    if len(buf) - off < count:
        raise TruncatedFile(f"{path}: expected {count} labels, found {len(buf) - off}")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=off)


def load_idx(images_path, labels_path, name: str = "") -> Dataset:
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise CountMismatch(f"{len(pixels)} images but {len(labels)} labels")
    images = pixels.astype(np.float32) / np.float32(255.0)
    return Dataset(images, labels.astype(np.int64), name)


def write_idx(images_path, labels_path, pixels, labels, rows=28, cols=28, compress=None):
    """Write uint8 pixels (n, rows*cols) and labels as IDX; gzip if the name ends in .gz."""
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(len(pixels), rows * cols)
    labels = np.asarray(labels, dtype=np.uint8)
    img = struct.pack(">4I", IMAGE_MAGIC, len(pixels), rows, cols) + pixels.tobytes()
    lab = struct.pack(">2I", LABEL_MAGIC, len(labels)) + labels.tobytes()
    for path, buf in ((images_path, img), (labels_path, lab)):
        path = Path(path)
        gz = path.suffix == ".gz" if compress is None else compress
        path.write_bytes(gzip.compress(buf, mtime=0) if gz else buf)


def load_dataset(name: str = "mnist", split: str = "train", directory=None) -> Dataset:
    """Load a fetched dataset from ``directory / name`` (default: OSWI_DATA_DIR)."""
    if split not in FILES:
        raise ValueError(f"split must be one of {sorted(FILES)}")
    root = data_dir(directory) / name
    img, lab = (root / f for f in FILES[split])
    for p in (img, lab):
        if not p.exists():
            raise DatasetError(f"{p} not found; run `oswi fetch --dataset {name}` "
                               "or set OSWI_DATA_DIR")
    return load_idx(img, lab, f"{name}-{split}")


def subset(dataset: Dataset, n: int, seed: int = 0) -> Dataset:
    """Seeded sample of n rows without replacement.

    For n >= 10 * classes each class gets n // classes rows (or all it has)
    and the rest is drawn uniformly from what is left.
    """
    total = len(dataset)
    if n > total:
        raise TooLarge(f"subset of {n} from {total} samples")
    if n < 0:
        raise ValueError("n must be nonnegative")
    gen = _rng.substream(seed, _rng.SUBSET)
    classes = np.unique(dataset.labels)
    if n >= 10 * len(classes):
        quota = n // len(classes)
        chosen = []
        for c in classes:
            members = np.flatnonzero(dataset.labels == c)
            chosen.append(gen.choice(members, size=min(quota, len(members)), replace=False))
        chosen = np.concatenate(chosen)
        rest = np.setdiff1d(np.arange(total), chosen)
        extra = gen.choice(rest, size=n - len(chosen), replace=False)
        idx = gen.permutation(np.concatenate([chosen, extra]))
    else:
        idx = gen.choice(total, size=n, replace=False)
    return dataset.take(idx, f"{dataset.name}[{n}]")


def split_validation(dataset: Dataset, fraction: float = 0.15, seed: int = 0):
    """Seeded shuffle, then the last round(fraction * n) rows become validation."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    order = _rng.substream(seed, _rng.SPLIT).permutation(len(dataset))
    n_val = int(round(fraction * len(dataset)))
    n_tr = len(dataset) - n_val
    return (dataset.take(order[:n_tr], dataset.name + ":train"),
            dataset.take(order[n_tr:], dataset.name + ":val"))


def batches(dataset: Dataset, batch_size: int, seed: int, epoch: int):
    order = _rng.substream(seed, _rng.SHUFFLE, epoch).permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


# --- fetching -----------------------------------------------------------------

def _digest(path, algo) -> str:
    h = hashlib.new(algo)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_manifest(path) -> dict:
    path = Path(path)
    return json.loads(path.read_text()) if path.exists() else {}


def fetch(name: str, directory=None, mirrors=None, manifest=None, timeout: float = 60.0):
    """Download the four archives of ``name`` into ``directory / name``.

    Each file is checked against the manifest's SHA-256 when one is recorded,
    otherwise against the published MD5, after which its SHA-256 is recorded.
    A file failing verification is removed and ChecksumMismatch raised.
    Returns the list of verified paths.
    """
    if name not in MIRRORS:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(MIRRORS)}")
    root = data_dir(directory) / name
    root.mkdir(parents=True, exist_ok=True)
    manifest_path = Path(manifest) if manifest else root / MANIFEST_NAME
    recorded = _load_manifest(manifest_path)
    mirrors = list(mirrors) if mirrors else MIRRORS[name]

    paths = []
    for fname in FILES["train"] + FILES["test"]:
        target = root / fname
        if not target.exists():
            _download(fname, mirrors, target, timeout)
        entry = recorded.get(fname, {})
        if "sha256" in entry:
            ok = _digest(target, "sha256") == entry["sha256"]
        else:
            ok = _digest(target, "md5") == KNOWN_MD5[name][fname]
        if not ok:
            target.unlink()
            raise ChecksumMismatch(f"{fname}: checksum mismatch, file removed")
        recorded[fname] = {"sha256": _digest(target, "sha256")}
        paths.append(target)
    manifest_path.write_text(json.dumps(recorded, indent=2, sort_keys=True) + "\n")
    return paths


def _download(fname, mirrors, target: Path, timeout):
    errors = []
    part = target.with_name(target.name + ".part")
    for base in mirrors:
        url = base.rstrip("/") + "/" + fname
        try:
            with urllib.request.urlopen(url, timeout=timeout) as resp, open(part, "wb") as out:
                while chunk := resp.read(1 << 20):
                    out.write(chunk)
        except (urllib.error.URLError, OSError) as exc:
            errors.append(f"{url}: {exc}")
            part.unlink(missing_ok=True)
            continue
        part.replace(target)
        return
    raise DatasetError("all mirrors failed:\n  " + "\n  ".join(errors))

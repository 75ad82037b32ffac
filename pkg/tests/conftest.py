import gzip
import importlib.util
from pathlib import Path

import numpy as np
import pytest

from oswi import data


def _mlxtend_sample():
    """5000 real MNIST digits bundled with mlxtend (label in the last column)."""
    spec = importlib.util.find_spec("mlxtend")
    if spec is None:
        return None
    path = Path(spec.submodule_search_locations[0]) / "data" / "data" / "mnist_5k.csv.gz"
    if not path.exists():
        return None
    with gzip.open(path) as fh:
        return np.loadtxt(fh, delimiter=",", dtype=np.int64)


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    """Directory holding mnist/train-*.gz.

    Real files under OSWI_DATA_DIR win; otherwise the mlxtend sample is
    written out as IDX so the loader is exercised end to end.
    """
    try:
        data.load_dataset("mnist", "train")
        return data.data_dir()
    except data.DatasetError:
        pass
    arr = _mlxtend_sample()
    if arr is None:
        pytest.skip("no MNIST files under OSWI_DATA_DIR and mlxtend is not installed")
    root = tmp_path_factory.mktemp("data")
    (root / "mnist").mkdir()
    img, lab = data.FILES["train"]
    data.write_idx(root / "mnist" / img, root / "mnist" / lab, arr[:, :-1], arr[:, -1])
    return root


@pytest.fixture(scope="session")
def mnist(mnist_dir):
    return data.load_dataset("mnist", "train", mnist_dir)

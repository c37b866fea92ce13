"""Write MNIST-format IDX files from the 5000-image subset bundled with mlxtend.

    python scripts/make_mnist_idx.py --out data/mnist

The full MNIST archive is not reachable offline; mlxtend ships a 5k sample of
the training split as ``mnist_5k.csv.gz`` (784 pixels then the label). This
locates that file without importing mlxtend and writes
``train-images-idx3-ubyte`` / ``train-labels-idx1-ubyte`` to ``--out``.
"""

import argparse
import importlib.util
from pathlib import Path

import numpy as np

from acttend.mnist import TRAIN_FILES, write_idx_images, write_idx_labels


def bundled_csv() -> Path:
    spec = importlib.util.find_spec("mlxtend")
    if spec is None or spec.origin is None:
        raise FileNotFoundError("mlxtend is not installed (pip install --no-deps mlxtend)")
    path = Path(spec.origin).parent / "data" / "data" / "mnist_5k.csv.gz"
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def convert(out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = np.loadtxt(bundled_csv(), delimiter=",", dtype=np.int64)
    images = raw[:, :784].reshape(-1, 28, 28)
    labels = raw[:, 784]
    img_path, lab_path = out_dir / TRAIN_FILES[0], out_dir / TRAIN_FILES[1]
    write_idx_images(img_path, images)
    write_idx_labels(lab_path, labels)
    return img_path, lab_path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/mnist")
    args = ap.parse_args()
    for p in convert(args.out):
        print(p)


if __name__ == "__main__":
    main()

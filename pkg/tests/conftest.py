import numpy as np
import pytest

from woodtex.harness import generate_synthetic_dataset
from woodtex.imagecore import GrayImage


def make_blob_image(size=64, cx=32.0, cy=32.0, sigma=4.0, amp=0.8):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    blob = amp * np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma ** 2)))
    return GrayImage(pixels=np.clip(blob, 0.0, 1.0))


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth_small") / "data"
    return generate_synthetic_dataset(root, classes=3, images_per_class=8,
                                      size=128, rng_seed=11)


@pytest.fixture(scope="session")
def acceptance_dataset(tmp_path_factory):
    """The corpus the acceptance criteria run on: 5 classes x 40 images, 256px."""
    import time
    root = tmp_path_factory.mktemp("synth_acceptance") / "data"
    t0 = time.perf_counter()
    ds = generate_synthetic_dataset(root, classes=5, images_per_class=40,
                                    size=256, rng_seed=42)
    ds.generation_seconds = time.perf_counter() - t0
    return ds

import numpy as np

from scatkit.datasets import (
    N_TEXTURE_CLASSES,
    load_image_folder,
    reference_image,
    texture_dataset,
)
from scatkit.fileio import write_image
from scatkit.grid import ColorSpace


def test_reference_image_is_deterministic():
    a = reference_image(64)
    b = reference_image(64)
    assert np.array_equal(a.data, b.data)
    assert a.color_space is ColorSpace.RGB
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0


def test_texture_dataset_shapes_and_determinism():
    imgs, labels = texture_dataset(3, size=16, seed=9)
    assert len(imgs) == 3 * N_TEXTURE_CLASSES
    assert sorted(set(labels)) == list(range(N_TEXTURE_CLASSES))
    again, _ = texture_dataset(3, size=16, seed=9)
    for a, b in zip(imgs, again):
        assert np.array_equal(a.data, b.data)
    assert all(im.data.shape == (1, 16, 16) for im in imgs)


def test_folder_loader_round_trip(tmp_path):
    imgs, labels = texture_dataset(2, size=16, seed=4)
    for i, (im, y) in enumerate(zip(imgs[:6], labels[:6])):
        d = tmp_path / f"class_{y}"
        d.mkdir(exist_ok=True)
        write_image(d / f"s{i}.png", im)
    loaded, got_labels, names = load_image_folder(tmp_path)
    assert len(loaded) == 6
    assert names == sorted(names)
    assert all(im.channels == 1 for im in loaded)

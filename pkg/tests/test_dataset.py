import numpy as np
import pytest
from PIL import Image

from melaseg import dataset
from melaseg.errors import FormatError, ImageDecodeError, InconsistentLabelError


def test_white_png_decodes(tmp_path):
    p = tmp_path / "w.png"
    Image.new("RGB", (1, 1), (255, 255, 255)).save(p)
    img = dataset.load_image(p)
    assert img.shape == (1, 1, 3) and img.dtype == np.uint8
    assert img[0, 0].tolist() == [255, 255, 255]


def test_truncated_jpeg_is_a_decode_error(tmp_path, rng):
    p = tmp_path / "ISIC_9.jpg"
    Image.fromarray(rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)).save(p, quality=95)
    data = p.read_bytes()
    p.write_bytes(data[: len(data) // 2])
    with pytest.raises(ImageDecodeError, match="ISIC_9.jpg"):
        dataset.load_image(p)


def test_garbage_file_is_a_decode_error(tmp_path):
    p = tmp_path / "x.png"
    p.write_bytes(b"not an image")
    with pytest.raises(ImageDecodeError):
        dataset.load_image(p)


def test_dimensions_match_second_decoder(tmp_path, rng):
    import matplotlib.image as mpimg

    p = tmp_path / "ISIC_1.jpg"
    Image.fromarray(rng.integers(0, 256, (37, 53, 3)).astype(np.uint8)).save(p)
    assert dataset.load_image(p).shape[:2] == mpimg.imread(p).shape[:2] == (37, 53)


def test_sixteen_bit_rescaled(tmp_path):
    p = tmp_path / "g16.png"
    arr = np.array([[0, 65535], [257 * 128, 257 * 3]], dtype=np.uint16)
    Image.fromarray(arr).save(p)
    img = dataset.load_image(p)
    assert img.dtype == np.uint8
    assert img[..., 0].tolist() == [[0, 255], [128, 3]]


def test_grayscale_and_rgba_become_rgb(tmp_path):
    g = tmp_path / "g.png"
    Image.new("L", (2, 3), 77).save(g)
    assert dataset.load_image(g).shape == (3, 2, 3)
    a = tmp_path / "a.png"
    Image.new("RGBA", (2, 2), (1, 2, 3, 4)).save(a)
    assert dataset.load_image(a)[0, 0].tolist() == [1, 2, 3]


@pytest.mark.parametrize("value, expected", [(255, True), (0, False)])
def test_constant_masks(tmp_path, value, expected):
    p = tmp_path / "m.png"
    Image.new("L", (4, 3), value).save(p)
    m = dataset.load_mask(p)
    assert m.shape == (3, 4) and m.dtype == bool
    assert np.all(m == expected)


def test_mask_threshold_at_128(tmp_path):
    p = tmp_path / "m.png"
    arr = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    Image.fromarray(arr).save(p)
    assert dataset.load_mask(p).tolist() == [[False, False, True, True]]


def test_rgb_mask_rejected(tmp_path):
    p = tmp_path / "m.png"
    Image.new("RGB", (2, 2)).save(p)
    with pytest.raises(FormatError):
        dataset.load_mask(p)


def test_mask_round_trip(tmp_path, rng):
    m = rng.random((17, 23)) < 0.4
    p = tmp_path / "ISIC_5_segmentation.png"
    dataset.save_mask(m, p)
    assert np.array_equal(dataset.load_mask(p), m)
    raw = np.asarray(Image.open(p))
    assert set(np.unique(raw).tolist()) <= {0, 255}


def test_labels(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text(
        "image_id,melanoma,seborrheic_keratosis\n"
        "ISIC_1,1.0,0.0\nISIC_2,0.0,0.0\nISIC_4,0.0,1.0\n"
    )
    assert dataset.load_labels(p) == {
        "ISIC_1": "melanoma",
        "ISIC_2": "nevus",
        "ISIC_4": "seborrheic_keratosis",
    }


def test_label_both_positive_is_error(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text("image_id,melanoma,seborrheic_keratosis\nISIC_3,1.0,1.0\n")
    with pytest.raises(InconsistentLabelError, match="ISIC_3"):
        dataset.load_labels(p)


def test_label_missing_column_is_error(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text("image_id,melanoma\nISIC_1,1.0\n")
    with pytest.raises(FormatError, match="seborrheic_keratosis"):
        dataset.load_labels(p)


def test_labels_round_trip(tmp_path):
    labels = {"ISIC_1": "melanoma", "ISIC_2": "nevus", "ISIC_3": "seborrheic_keratosis"}
    p = tmp_path / "gt.csv"
    dataset.write_labels(labels, p)
    assert dataset.load_labels(p) == labels


def test_submission_format(tmp_path):
    p = tmp_path / "sub.csv"
    dataset.write_submission([("ISIC_1", 0.5, 0.25), ("ISIC_0", 1.0, 0.0)], p)
    assert p.read_text() == (
        "image_id,melanoma,seborrheic_keratosis\n"
        "ISIC_1,0.500000,0.250000\n"
        "ISIC_0,1.000000,0.000000\n"
    )


def test_empty_submission_is_header_only(tmp_path):
    p = tmp_path / "sub.csv"
    dataset.write_submission([], p)
    assert p.read_text() == "image_id,melanoma,seborrheic_keratosis\n"


def test_submission_rejects_out_of_range(tmp_path):
    with pytest.raises(ValueError):
        dataset.write_submission([("ISIC_1", 1.5, 0.0)], tmp_path / "s.csv")


def test_submission_round_trips_bytes(tmp_path, rng):
    p, q = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = [(f"ISIC_{k}", float(a), float(b)) for k, (a, b) in enumerate(rng.random((9, 2)))]
    dataset.write_submission(rows, p)
    dataset.write_submission(dataset.read_submission(p), q)
    assert p.read_bytes() == q.read_bytes()


def test_directory_listing(tmp_path):
    for name in ("ISIC_2.jpg", "ISIC_1.png", "ISIC_1_segmentation.png", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    assert [p.name for p in dataset.list_images(tmp_path)] == ["ISIC_1.png", "ISIC_2.jpg"]
    assert list(dataset.list_masks(tmp_path)) == ["ISIC_1"]

import hashlib
import itertools
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from utrnet.data import load_dataset
from utrnet.exceptions import ContractError, DataValidationError
from utrnet.synthgen import (
    SPACE,
    AugmentationConfig,
    GlyphAtlas,
    LineSpec,
    SynthConfig,
    augment,
    contrast_stretch,
    desk_atlas,
    generate_dataset,
    layout,
    positional_variants,
    render_ink,
    render_line,
    sample_text,
)
from utrnet.synthgen.atlas import DOT_SIZE


@pytest.fixture(scope="module")
def atlas():
    return desk_atlas()


def _digest(directory: Path) -> dict:
    return {
        p.relative_to(directory).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


def test_atlas_structure(atlas):
    assert len(atlas.glyphs) == 24
    assert atlas.charset[-1] == SPACE
    fams = atlas.families()
    assert sum(len(m) > 1 for m in fams.values()) == 6
    assert len(atlas.dot_distinguished()) == 18 and len(atlas.shape_unique()) == 6
    heights = {b.shape[0] for g in atlas.glyphs.values() for b in g.bitmaps.values()}
    assert heights == {atlas.em_height}


def test_dot_family_separability(atlas):
    for members in atlas.families().values():
        for a, b in itertools.combinations(members, 2):
            diff = np.sum(atlas.glyphs[a].bitmap("isolated") != atlas.glyphs[b].bitmap("isolated"))
            assert diff >= DOT_SIZE * DOT_SIZE, (a, b, diff)


def test_positional_variants():
    assert positional_variants("abc d") == ["initial", "medial", "final", "space", "isolated"]


def test_single_glyph_ink_is_bitmap(atlas):
    np.testing.assert_array_equal(render_ink("a", atlas), atlas.glyphs["a"].bitmap("isolated"))


def test_two_glyphs_no_overlap_additive(atlas):
    ink = render_ink("a b", atlas)
    w = atlas.glyphs["a"].advance
    assert ink.shape[1] == 2 * w + atlas.space_advance
    # right to left: 'a' sits at the right end
    np.testing.assert_array_equal(ink[:, -w:], atlas.glyphs["a"].bitmap("isolated"))
    np.testing.assert_array_equal(ink[:, :w], atlas.glyphs["b"].bitmap("isolated"))


def test_overlap_geometry(atlas):
    adv = atlas.glyphs["a"].advance
    _, width = layout("ab", atlas, 0.3)
    assert width == 2 * adv - round(0.3 * adv)
    _, spaced = layout("a b", atlas, 0.3)
    assert spaced == 2 * adv + atlas.space_advance


def test_overlap_beyond_limit(atlas):
    with pytest.raises(ContractError):
        layout("ab", atlas, 0.9)


def test_missing_glyph_named(atlas):
    with pytest.raises(DataValidationError, match="'z'"):
        render_line(LineSpec("az"), atlas)


def test_render_line_colours_and_label(atlas):
    img, text = render_line(LineSpec("ab", ink_color=(20, 20, 20), background_color=(240, 240, 240)), atlas)
    assert text == "ab" and img.shape[0] == 1 and img.dtype == np.float32
    assert img.max() == pytest.approx(240 / 255) and img.min() == pytest.approx(20 / 255)


def test_render_line_height_scaling(atlas):
    img, _ = render_line(LineSpec("abc", height=64), atlas)
    assert img.shape[1] == 64


def test_sample_text_single_word():
    assert sample_text(["w"], 1, 1, np.random.default_rng(0)) == "w"
    with pytest.raises(ContractError):
        sample_text([], 1, 1, np.random.default_rng(0))


def test_sample_text_uniform_frequencies():
    vocab = [f"w{i}" for i in range(10)]
    rng = np.random.default_rng(0)
    counts = Counter(sample_text(vocab, 1, 1, rng) for _ in range(10_000))
    expected, sigma = 1000, np.sqrt(10_000 * 0.1 * 0.9)
    assert all(abs(counts[w] - expected) < 3 * sigma for w in vocab)
    chi2 = sum((counts[w] - expected) ** 2 / expected for w in vocab)
    assert chi2 < 27.88  # 99.9% quantile of chi-square with 9 dof


def test_augment_identities():
    img = np.random.default_rng(0).random((32, 40)).astype(np.float32)
    np.testing.assert_array_equal(augment(img, AugmentationConfig(), np.random.default_rng(0)), img)
    cfg = AugmentationConfig(rotation=True, rotation_range=(0.0, 0.0))
    np.testing.assert_array_equal(augment(img, cfg, np.random.default_rng(0)), img)


def test_contrast_stretch_two_levels():
    img = np.where(np.arange(20).reshape(4, 5) % 2, 0.6, 0.3)
    out = contrast_stretch(img)
    assert set(np.unique(out)) == {0.0, 1.0}


def test_augment_deterministic_and_bounded():
    img, _ = render_line(LineSpec("abc def"), desk_atlas())
    cfg = AugmentationConfig.all_on()
    a = augment(img, cfg, np.random.default_rng(3))
    b = augment(img, cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_bad_range_rejected():
    with pytest.raises(ContractError):
        AugmentationConfig(rotation_range=(3.0, -3.0))


def test_generate_single_sample(tmp_path):
    out = generate_dataset(tmp_path / "d", n=1, seed=0)
    assert len(list((out / "images").iterdir())) == 1
    assert len((out / "labels.tsv").read_text(encoding="utf-8").splitlines()) == 1


def test_generate_is_byte_identical(tmp_path):
    a = generate_dataset(tmp_path / "a", n=6, seed=7, config=SynthConfig(augmentation=AugmentationConfig.all_on()))
    b = generate_dataset(tmp_path / "b", n=6, seed=7, config=SynthConfig(augmentation=AugmentationConfig.all_on()))
    assert _digest(a) == _digest(b)
    c = generate_dataset(tmp_path / "c", n=6, seed=8)
    assert _digest(a) != _digest(c)


def test_generate_coverage_and_round_trip(tmp_path):
    out = generate_dataset(tmp_path / "d", n=512, seed=1)
    samples, charset = load_dataset(out)
    assert len(samples) == 512
    seen = Counter("".join(s.transcript for s in samples))
    assert all(seen[c] >= 1 for c in charset.chars)
    assert all(s.image.shape[0] == 32 for s in samples)


def test_coverage_forced_on_tiny_sets(tmp_path):
    out = generate_dataset(tmp_path / "d", n=2, seed=0)
    samples, charset = load_dataset(out)
    assert set("".join(s.transcript for s in samples)) == set(charset.chars)


def test_external_atlas_round_trip(tmp_path, atlas):
    atlas.save(tmp_path / "atlas")
    loaded = GlyphAtlas.load(tmp_path / "atlas")
    assert loaded.charset == atlas.charset
    for ch in atlas.glyphs:
        for v, bmp in atlas.glyphs[ch].bitmaps.items():
            np.testing.assert_array_equal(loaded.glyphs[ch].bitmap(v), bmp)

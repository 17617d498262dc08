"""Standardizer, RevIN, and patch tokenization."""

import numpy as np
import pytest
import torch

from ethercast.errors import ShapeError
from ethercast.transforms import (apply_standardizer, fit_standardizer,
                                  patch_count, patchify, patchify_reference,
                                  padded_length, revin, revin_denormalize,
                                  revin_normalize)

from _oracles import enumerate_patches


class TestStandardizer:
    def test_population_stats(self):
        stats = fit_standardizer([1.0, 2.0, 3.0])
        assert stats.mean == pytest.approx(2.0)
        assert stats.std == pytest.approx(0.816497, abs=1e-6)  # sqrt(2/3)

    def test_constant_input(self):
        stats = fit_standardizer([5.0, 5.0, 5.0])
        assert stats.mean == 5.0 and stats.std == 0.0
        out = stats.transform([5.0, 5.0])
        assert np.allclose(out, 0.0)

    def test_empty_errors(self):
        with pytest.raises(ShapeError):
            fit_standardizer([])

    def test_forward_values(self):
        stats = fit_standardizer([1.0, 2.0, 3.0])
        out = apply_standardizer([1.0, 2.0, 3.0], stats)
        assert out == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-3)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(500) * 37.0 + 1500.0
        stats = fit_standardizer(values[:300])
        back = apply_standardizer(apply_standardizer(values, stats),
                                  stats, "inverse")
        assert np.max(np.abs(back - values)) < 1e-9

    def test_torch_tensors_pass_through(self):
        stats = fit_standardizer([1.0, 2.0, 3.0])
        out = stats.transform(torch.tensor([2.0]))
        assert isinstance(out, torch.Tensor)
        assert out.item() == pytest.approx(0.0, abs=1e-9)

    def test_bad_direction(self):
        stats = fit_standardizer([1.0, 2.0])
        with pytest.raises(ValueError):
            apply_standardizer([1.0], stats, "sideways")


class TestRevin:
    def test_hand_computed_window(self):
        x = torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64)
        out, stats = revin_normalize(x)
        assert out[0].tolist() == pytest.approx([-1.2247, 0.0, 1.2247],
                                                abs=1e-3)
        assert stats.mean.item() == pytest.approx(2.0)
        assert stats.var.item() == pytest.approx(2.0 / 3.0)

    def test_constant_window_gives_zeros(self):
        x = torch.full((2, 5), 7.5, dtype=torch.float64)
        out, _ = revin_normalize(x)
        assert torch.allclose(out, torch.zeros_like(out))

    def test_round_trip_many_windows(self):
        torch.manual_seed(1)
        x = torch.randn(1000, 7, dtype=torch.float64) * 12.0 + 80.0
        out, stats = revin_normalize(x)
        back = revin_denormalize(out, stats)
        assert (back - x).abs().max().item() < 1e-6

    def test_normalized_moments(self):
        torch.manual_seed(2)
        x = torch.randn(64, 16, dtype=torch.float64) * 3.0
        out, _ = revin_normalize(x)
        assert out.mean(dim=1).abs().max().item() < 1e-9
        var = out.var(dim=1, unbiased=False)
        assert (var - 1.0).abs().max().item() < 1e-4  # eps-sized gap

    def test_single_window_wrapper(self):
        vec, state = revin([4.0, 5.0, 6.0], "normalize")
        back, _ = revin(vec, "denormalize", state)
        assert back.tolist() == pytest.approx([4.0, 5.0, 6.0], abs=1e-9)

    def test_denormalize_without_state(self):
        with pytest.raises(ValueError):
            revin([1.0, 2.0], "denormalize")

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            revin_normalize(torch.zeros(3))


class TestPatchify:
    def test_seq7_patch16_stride8_single_patch(self):
        assert padded_length(7, 16, 8) == 16
        assert patch_count(7, 16, 8) == 1
        x = torch.arange(7, dtype=torch.float32).unsqueeze(0)
        patches = patchify(x, 16, 8)
        assert patches.shape == (1, 1, 16)
        assert patches[0, 0, :7].tolist() == list(range(7))
        assert patches[0, 0, 7:].tolist() == [6.0] * 9  # replicate last value

    def test_seq16_gives_two_patches(self):
        assert padded_length(16, 16, 8) == 24
        assert patch_count(16, 16, 8) == 2
        x = torch.arange(16, dtype=torch.float32).unsqueeze(0)
        patches = patchify(x, 16, 8)
        assert patches.shape == (1, 2, 16)
        assert patches[0, 1, :8].tolist() == list(range(8, 16))
        assert patches[0, 1, 8:].tolist() == [15.0] * 8

    def test_count_formula_against_enumeration_grid(self):
        for n in range(1, 65):
            for patch in range(1, 33):
                for stride in range(1, 17):
                    expected, padded = enumerate_patches(
                        range(1, n + 1), patch, stride
                    )
                    assert padded_length(n, patch, stride) == padded
                    assert patch_count(n, patch, stride) == len(expected)

    def test_values_match_enumeration(self):
        rng = np.random.default_rng(3)
        for n, patch, stride in ((5, 3, 2), (7, 16, 8), (20, 8, 4),
                                 (13, 4, 5), (1, 2, 3)):
            values = rng.standard_normal(n)
            got = patchify(torch.tensor(values).unsqueeze(0), patch, stride)
            expected, _ = enumerate_patches(values, patch, stride)
            assert got.shape == (1, len(expected), patch)
            for k, ref in enumerate(expected):
                assert got[0, k].tolist() == pytest.approx(ref)
            assert patchify_reference(values, patch, stride) == expected

    def test_batched(self):
        x = torch.randn(5, 10)
        patches = patchify(x, 4, 3)
        assert patches.shape == (5, patch_count(10, 4, 3), 4)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            patchify(torch.zeros(1, 7), 0, 8)
        with pytest.raises(ValueError):
            patchify(torch.zeros(1, 7), 16, 0)
        with pytest.raises(ShapeError):
            patchify(torch.zeros(7), 16, 8)

"""Feature magnitude, Gaussian injection and noise specs."""
import pytest
import torch

from graph.forward import forward
from noise.injection import NoiseEntry, NoiseSpec, apply_noise_spec, feature_magnitude, inject
from noise.rng import RngState, StreamTag, derive_seed
from utils.errors import ConfigError, ShapeError


class TestFeatureMagnitude:
    def test_zero(self):
        assert feature_magnitude(torch.zeros(2, 3, 4, 4)).tolist() == [0.0, 0.0]

    def test_symmetric_ones(self):
        x = torch.ones(1, 2, 2, 2)
        x[0, 0] = -1.0
        assert feature_magnitude(x).tolist() == [1.0]

    def test_matches_loop(self):
        x = torch.randn(3, 2, 4, 5, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
        for n in range(3):
            expected = sum(abs(v) for v in x[n].flatten().tolist()) / x[n].numel()
            assert feature_magnitude(x)[n].item() == pytest.approx(expected, rel=1e-12)

    def test_empty(self):
        with pytest.raises(ShapeError):
            feature_magnitude(torch.zeros(0, 3, 4, 4))


class TestInject:
    def test_zero_entry_is_identity(self):
        x = torch.randn(2, 3, 4, 4)
        out = inject(x, NoiseEntry(layer_index=0, sigma_pct=0.0), RngState(seed=1))
        assert out is x

    def test_zero_activation_stays_zero(self):
        x = torch.zeros(2, 3, 4, 4)
        out = inject(x, NoiseEntry(layer_index=0, sigma_pct=25.0), RngState(seed=1))
        assert torch.count_nonzero(out) == 0

    def test_six_percent_std(self):
        x = torch.ones(1, 1, 1000, 1000)
        out = inject(x, NoiseEntry(layer_index=2, sigma_pct=6.0), RngState(seed=11))
        z = (out - x).double()
        assert z.std().item() == pytest.approx(0.06, rel=0.02)
        assert abs(z.mean().item()) < 3 * 0.06 / 1000

    def test_mean_offset(self):
        x = torch.ones(1, 1, 300, 300)
        out = inject(x, NoiseEntry(layer_index=0, sigma_pct=1.0, mean=0.5), RngState(seed=2))
        assert (out - x).mean().item() == pytest.approx(0.5, abs=0.001)

    def test_constant_sigma_mode(self):
        x = torch.full((1, 1, 400, 400), 10.0)
        out = inject(x, NoiseEntry(layer_index=0, sigma_pct=5.0), RngState(seed=3), sigma_mode="constant")
        assert (out - x).std().item() == pytest.approx(0.05, rel=0.03)

    def test_per_sample_magnitude(self):
        x = torch.cat([torch.ones(1, 1, 200, 200), 10 * torch.ones(1, 1, 200, 200)])
        z = inject(x, NoiseEntry(layer_index=0, sigma_pct=10.0), RngState(seed=4)) - x
        assert z[0].std().item() == pytest.approx(0.1, rel=0.03)
        assert z[1].std().item() == pytest.approx(1.0, rel=0.03)


class TestStreams:
    def test_derive_seed_stable(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)

    def test_streams_keyed_by_call_and_batch_position(self):
        rng = RngState(seed=5)
        full = rng.normal((4, 2, 3), call=0, layer=1, tag=StreamTag.HW_NOISE)
        part = rng.normal((2, 2, 3), call=0, layer=1, tag=StreamTag.HW_NOISE)
        assert torch.equal(full[:2], part)
        assert not torch.equal(full[0], full[1])
        # Splitting the batch moves rows 2 and 3 to positions 0 and 1 of the next call.
        second = rng.normal((2, 2, 3), call=1, layer=1, tag=StreamTag.HW_NOISE)
        assert not torch.equal(full[2:], second)

    def test_tags_and_calls_differ(self):
        rng = RngState(seed=5)
        a = rng.normal((1, 8), 0, 1, StreamTag.HW_NOISE)
        assert not torch.equal(a, rng.normal((1, 8), 0, 1, StreamTag.EPSILON))
        assert not torch.equal(a, rng.normal((1, 8), 1, 1, StreamTag.HW_NOISE))
        assert rng.next_call() == 0 and rng.next_call() == 1


class TestNoiseSpec:
    def test_apply_sets_flags(self, cnn):
        noisy = apply_noise_spec(cnn, NoiseSpec.all_conv(cnn, 6.0))
        assert [i for i, layer in enumerate(noisy.layers) if layer.noise_enabled] == [0, 2, 4]
        assert not any(layer.noise_enabled for layer in cnn.layers)

    def test_empty_spec_clean_equals_noisy(self, cnn):
        x = torch.rand(2, 3, 32, 32)
        noisy = apply_noise_spec(cnn, NoiseSpec())
        assert torch.equal(forward(noisy, x, mode="noisy")[0], forward(cnn, x)[0])

    def test_out_of_range(self, cnn):
        with pytest.raises(ConfigError):
            apply_noise_spec(cnn, NoiseSpec.for_layers([42], 6.0))

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            NoiseEntry(layer_index=0, sigma_pct=-1.0)

    def test_same_seed_same_logits(self, cnn):
        x = torch.rand(1, 3, 32, 32)
        noisy = apply_noise_spec(cnn, NoiseSpec.all_conv(cnn, 6.0, seed=3))
        assert torch.equal(forward(noisy, x, mode="noisy")[0], forward(noisy, x, mode="noisy")[0])

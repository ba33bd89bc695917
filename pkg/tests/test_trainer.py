"""Gradients, Adam, training loops, evaluation and artifacts."""
import math

import pytest
import torch

from dataset.synthetic import gen_synthetic
from denoiser.attach import attach
from denoiser.block import denoiser_forward, denoiser_init
from graph.forward import ActivationTape, forward
from graph.layers import LayerKind, make_layer
from graph.model import ModelGraph, small_cnn
from noise.injection import NoiseSpec, apply_noise_spec
from noise.rng import RngState
from trainer.autodiff import backward, cross_entropy
from trainer.checkpoint import load_checkpoint, save_checkpoint
from trainer.evaluate_model import (evaluate_model, evaluate_over_seeds, noise_accuracy_table, noise_sweep,
                                    summarize)
from trainer.model_registry import ArtifactRegistry
from trainer.optim import AdamState, adam_step
from trainer.train_backbone import train_backbone
from trainer.train_denoisers import train_denoisers
from utils.errors import ConfigError, LabelRangeError, TapeMismatchError


def _starred64(seed: int = 0) -> ModelGraph:
    """Float64 SmallCNN with 6% noise and a denoiser (non-zero heads) after layer 2."""
    model = small_cnn(seed=seed).to(torch.float64)
    noisy = apply_noise_spec(model, NoiseSpec.all_conv(model, 6.0, seed=seed))
    starred = attach(noisy, [2], input_hw=(8, 8), freeze_backbone=False)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in (starred.attachments[2].head_mean, starred.attachments[2].head_scale):
            layer.weight.copy_(0.1 * torch.randn(layer.weight.shape, generator=generator, dtype=torch.float64))
            layer.bias.copy_(0.1 * torch.randn(layer.bias.shape, generator=generator, dtype=torch.float64))
    return starred


class TestBackward:
    def test_linear_outer_product(self):
        layers = [make_layer(LayerKind.GLOBAL_AVG_POOL, 3), make_layer(LayerKind.LINEAR, 3, 2)]
        model = ModelGraph(layers=layers, classes=2)
        x = torch.randn(4, 3, 2, 2)
        logits, tape = forward(model, x, record=True)
        grads = backward(tape, model, torch.ones_like(logits))
        pooled = x.mean(dim=(2, 3))
        assert torch.allclose(grads["layers.1.weight"], torch.ones(2, 1) * pooled.sum(0), atol=1e-6)
        assert torch.allclose(grads["layers.1.bias"], torch.full((2,), 4.0))

    def test_matches_finite_differences(self):
        starred = _starred64()
        generator = torch.Generator().manual_seed(1)
        x = torch.rand(2, 3, 8, 8, generator=generator, dtype=torch.float64)
        labels = torch.tensor([1, 7])

        logits, tape = forward(starred, x, mode="noisy", rng=RngState(seed=2), record=True)
        _, loss_grad = cross_entropy(logits, labels)
        grads = backward(tape, starred, loss_grad)
        replay = ActivationTape.for_replay(starred, tape.noise, tape.eps)
        assert sorted(replay.noise) == [0, 2, 4] and sorted(replay.eps) == [2]

        def loss_value() -> float:
            out, _ = forward(starred, x, mode="noisy", replay=replay)
            return cross_entropy(out, labels)[0].item()

        step = 1e-5
        checked = 0
        for name, param in starred.named_parameters().items():
            flat = param.detach().view(-1)
            picks = torch.randint(0, flat.numel(), (3,), generator=generator)
            for k in picks.tolist():
                original = flat[k].item()
                with torch.no_grad():
                    flat[k] = original + step
                    plus = loss_value()
                    flat[k] = original - step
                    minus = loss_value()
                    flat[k] = original
                numeric = (plus - minus) / (2 * step)
                analytic = grads[name].view(-1)[k].item()
                assert abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8, name
                checked += 1
        assert checked == 3 * len(starred.named_parameters())

    def test_op_gradcheck(self):
        params = denoiser_init(4, seed=2)
        params.cast(torch.float64)
        eps = torch.randn(1, 4, 3, 3, dtype=torch.float64)
        x = torch.randn(1, 4, 3, 3, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(lambda t: denoiser_forward(t, params, eps)[0], (x,))

    def test_frozen_layers_absent(self, cnn):
        starred = attach(cnn, [4])
        logits, tape = forward(starred, torch.rand(1, 3, 32, 32), record=True)
        grads = backward(tape, starred, torch.ones_like(logits))
        assert grads and all(name.startswith("denoiser.4.") for name in grads)

    def test_unrecorded_tape(self, cnn):
        logits, tape = forward(cnn, torch.rand(1, 3, 32, 32))
        with pytest.raises(TapeMismatchError):
            backward(tape, cnn, torch.ones_like(logits))

    def test_other_model_tape(self, cnn):
        logits, tape = forward(cnn, torch.rand(1, 3, 32, 32), record=True)
        with pytest.raises(TapeMismatchError):
            backward(tape, attach(cnn, [0]), torch.ones_like(logits))


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss, grad = cross_entropy(torch.zeros(3, 10), torch.tensor([0, 4, 9]))
        assert loss.item() == pytest.approx(math.log(10))
        assert grad.sum().item() == pytest.approx(0.0, abs=1e-7)

    def test_confident_correct(self):
        logits = torch.tensor([[100.0, 0.0, 0.0]])
        assert cross_entropy(logits, torch.tensor([0]))[0].item() == pytest.approx(0.0, abs=1e-6)

    def test_matches_scalar_oracle(self):
        logits = torch.randn(5, 4, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
        labels = torch.tensor([0, 3, 1, 2, 3])
        expected = 0.0
        for row, label in zip(logits.tolist(), labels.tolist()):
            top = max(row)
            expected += -(row[label] - top - math.log(sum(math.exp(v - top) for v in row)))
        assert cross_entropy(logits, labels)[0].item() == pytest.approx(expected / 5, rel=1e-6)

    def test_label_range(self):
        with pytest.raises(LabelRangeError):
            cross_entropy(torch.zeros(1, 3), torch.tensor([3]))


class TestAdam:
    def test_zero_gradient_no_change(self):
        param = torch.tensor([1.0, -2.0], requires_grad=True)
        params = {"p": param}
        adam_step(params, {"p": torch.zeros(2)}, AdamState())
        assert param.tolist() == [1.0, -2.0]

    def test_first_step_is_signed_lr(self):
        param = torch.zeros(3, dtype=torch.float64, requires_grad=True)
        state = AdamState(lr=1e-3)
        adam_step({"p": param}, {"p": torch.tensor([0.5, -3.0, 2.0], dtype=torch.float64)}, state)
        assert state.step == 1
        assert param.detach().tolist() == pytest.approx([-1e-3, 1e-3, -1e-3], abs=1e-6)

    def test_shape_mismatch(self):
        param = torch.zeros(3, requires_grad=True)
        with pytest.raises(ValueError):
            adam_step({"p": param}, {"p": torch.zeros(2)}, AdamState())


class TestTraining:
    def test_backbone_deterministic(self, tiny_data):
        model = small_cnn(seed=0)
        a, _, history = train_backbone(model, tiny_data, epochs=1, seed=3, batch_size=8)
        b, _, _ = train_backbone(model, tiny_data, epochs=1, seed=3, batch_size=8)
        assert len(history) == 1
        for name, tensor in a.named_parameters().items():
            assert torch.equal(tensor, b.named_parameters()[name])
        assert not torch.equal(a.layers[0].weight, model.layers[0].weight)

    def test_denoisers_need_attachments(self, cnn, tiny_data):
        with pytest.raises(ConfigError):
            train_denoisers(cnn, tiny_data, epochs=1)

    def test_zero_epochs_unchanged(self, cnn, tiny_data):
        starred = attach(cnn, [2], input_hw=(8, 8))
        trained, _, history = train_denoisers(starred, tiny_data, epochs=0)
        assert history == []
        for name, tensor in starred.named_parameters().items():
            assert torch.equal(tensor, trained.named_parameters()[name])

    def test_backbone_frozen(self, cnn, tiny_data):
        noisy = apply_noise_spec(cnn, NoiseSpec.all_conv(cnn, 6.0))
        starred = attach(noisy, [0, 4], input_hw=(8, 8))
        trained, state, _ = train_denoisers(starred, tiny_data, epochs=2, seed=1, batch_size=8)
        assert state.step == 2 * 4
        for name, tensor in starred.backbone_tensors().items():
            assert torch.equal(tensor, trained.backbone_tensors()[name]), name
        changed = [not torch.equal(t, trained.named_parameters()[n])
                   for n, t in starred.named_parameters().items() if n.startswith("denoiser.")]
        assert any(changed)


class TestEvaluation:
    def test_zero_sigma_equals_clean(self, cnn, tiny_data):
        table = noise_accuracy_table(cnn, tiny_data, 0.0, seeds=[0, 1])
        per_seed = table[table["row"].str.startswith("seed=")]
        assert (per_seed["noisy_acc"] == per_seed["clean_acc"]).all()

    def test_seed_rows(self, cnn, tiny_data):
        table = noise_accuracy_table(cnn, tiny_data, 6.0, seeds=list(range(5)))
        assert table["row"].tolist() == [f"seed={k}" for k in range(5)] + ["mean", "std"]
        mean = table.loc[table["row"] == "mean", "noisy_acc"].item()
        assert mean == pytest.approx(table["noisy_acc"][:5].mean())

    def test_sweep_shape(self, cnn, tiny_data):
        frame = noise_sweep(cnn, tiny_data, [2.0, 8.0], seeds=[0, 1])
        assert frame["sigma_pct"].tolist() == [2.0, 8.0]
        assert frame["denoised_mean"].isna().all()
        starred = attach(cnn, [2], input_hw=(8, 8))
        frame = noise_sweep(starred, tiny_data, [2.0], seeds=[0])
        assert frame["denoised_mean"].notna().all()

    def test_accuracy_range(self, cnn, tiny_data):
        metrics = evaluate_model(cnn, tiny_data)
        assert 0.0 <= metrics["accuracy"] <= 1.0
        assert metrics["loss"] > 0


@pytest.fixture(scope="module")
def blob_backbone():
    """SmallCNN trained on 4-class 8x8 blobs, with a held-out split."""
    train, held = gen_synthetic(seed=0, n=640, classes=4, size=8).split(0.2, seed=0)
    model, _, _ = train_backbone(small_cnn(classes=4, seed=0), train, epochs=5, seed=0, batch_size=32, lr=1e-2)
    return model, train, held


class TestSyntheticTrends:
    def test_backbone_learns_blobs(self, blob_backbone):
        model, _, held = blob_backbone
        assert evaluate_model(model, held)["accuracy"] >= 0.8

    def test_accuracy_falls_with_noise(self, blob_backbone):
        model, _, held = blob_backbone
        frame = noise_sweep(model, held, [0.0, 40.0, 160.0], seeds=[0, 1, 2])
        means = frame["noisy_mean"].tolist()
        assert means[0] == frame["clean_acc"][0]
        assert means[0] >= means[1] >= means[2]
        assert means[2] < means[0]

    def test_denoiser_training_lowers_held_out_noisy_loss(self, blob_backbone):
        model, train, held = blob_backbone
        noisy = apply_noise_spec(model, NoiseSpec.all_conv(model, 40.0))
        starred = attach(noisy, model.conv_indices(), input_hw=(8, 8))
        before = summarize(evaluate_over_seeds(starred, held, "noisy", seeds=[7, 8]), "loss")["mean"]
        trained, _, history = train_denoisers(starred, train, epochs=4, seed=1, batch_size=32, lr=3e-3)
        after = summarize(evaluate_over_seeds(trained, held, "noisy", seeds=[7, 8]), "loss")["mean"]
        assert history[-1]["loss"] < history[0]["loss"]
        assert after < before


class TestArtifacts:
    def test_checkpoint_round_trip(self, tmp_path, tiny_data):
        model, state, _ = train_backbone(small_cnn(seed=1), tiny_data, epochs=1, batch_size=16)
        path = save_checkpoint(model, str(tmp_path / "m.anmd"), state)
        loaded, loaded_state = load_checkpoint(path, with_state=True)
        assert loaded_state.step == state.step
        for name, moments in state.moments().items():
            assert torch.equal(moments["exp_avg"], loaded_state.moments()[name]["exp_avg"])
        assert (tmp_path / "m.adam.anmd").exists()

    def test_same_seed_same_bytes(self, tmp_path, tiny_data):
        for run in ("a", "b"):
            model, _, _ = train_backbone(small_cnn(seed=2), tiny_data, epochs=1, seed=2, batch_size=16)
            save_checkpoint(model, str(tmp_path / f"{run}.anmd"))
        assert (tmp_path / "a.anmd").read_bytes() == (tmp_path / "b.anmd").read_bytes()

    def test_registry_idempotent(self, tmp_path):
        registry = ArtifactRegistry(str(tmp_path))
        registry.register("plan", "p.txt", 0, {"budget": 10})
        first = (tmp_path / "registry.json").read_bytes()
        registry.register("plan", "p.txt", 0, {"budget": 10})
        assert (tmp_path / "registry.json").read_bytes() == first
        assert registry.get("plan")["budget"] == 10
        assert registry.list_artifacts() == ["plan"]


@pytest.mark.slow
def test_two_class_blobs_train_fast():
    data = gen_synthetic(seed=0, n=1024, classes=2, size=32)
    model, _, history = train_backbone(small_cnn(classes=2, seed=0), data, epochs=3, seed=0)
    assert history[-1]["train_acc"] >= 0.95
    assert evaluate_model(model, data)["accuracy"] >= 0.95

"""Gradient-norm layer scores and budgeted greedy selection."""
import math

import pytest
import torch

from denoiser.attach import attach
from denoiser.block import denoiser_param_count
from graph.forward import ActivationTape, forward
from graph.layers import LayerKind, make_layer
from graph.model import ModelGraph
from noise.injection import NoiseSpec, apply_noise_spec
from placement.scoring import eligible_layers, layer_grad_scores, layer_output_grads, summed_cross_entropy
from placement.selection import PlacementPlan, select_layers
from utils.errors import PlacementError

EXAMPLE_SCORES = {0: 0.5, 1: 0.9, 2: 0.7}
EXAMPLE_CHANNELS = {0: 10, 1: 64, 2: 64}
EXAMPLE_COSTS = {10: 1000, 64: 3376}


def _example_plan(eta_pct=4.0, mode="skip"):
    return select_layers(EXAMPLE_SCORES, eta_pct, 100_000, EXAMPLE_CHANNELS, mode=mode,
                         cost_fn=EXAMPLE_COSTS.__getitem__)


class TestScores:
    def test_constant_loss_scores_zero(self, toy_net):
        images = torch.rand(4, 3, 6, 6)
        scores = layer_grad_scores(toy_net, images, torch.zeros(4, dtype=torch.long),
                                   loss_fn=lambda logits, labels: logits.detach().sum())
        assert set(scores) == {0, 2, 4}
        assert all(score == 0.0 for score in scores.values())

    def test_unit_gradient_norm(self):
        layer = make_layer(LayerKind.POINTWISE, 2, 3, generator=torch.Generator().manual_seed(0))
        model = ModelGraph(layers=[layer])
        scores = layer_grad_scores(model, torch.rand(5, 2, 4, 4), torch.zeros(5, dtype=torch.long),
                                   loss_fn=lambda out, labels: out.sum())
        assert scores[0] == pytest.approx(math.sqrt(3 * 4 * 4))

    def test_matches_directional_finite_differences(self, toy_net):
        model = toy_net.to(torch.float64)
        generator = torch.Generator().manual_seed(5)
        images = torch.rand(3, 3, 6, 6, generator=generator, dtype=torch.float64)
        labels = torch.tensor([0, 2, 1])
        eligible = eligible_layers(model, tuple(images.shape))
        scores = layer_grad_scores(model, images, labels)
        grads = layer_output_grads(model, images, labels, eligible)
        perturbable = apply_noise_spec(model, NoiseSpec.for_layers(eligible, 0.0))

        step = 1e-5
        for index in eligible:
            direction = grads[index].detach()
            norms = direction.flatten(start_dim=1).norm(dim=1)
            unit = direction / norms.reshape(-1, 1, 1, 1)
            losses = []
            for sign in (1.0, -1.0):
                replay = ActivationTape.for_replay(perturbable, noise={index: sign * step * unit})
                logits, _ = forward(perturbable, images, mode="noisy", replay=replay)
                losses.append(torch.nn.functional.cross_entropy(logits, labels, reduction="none"))
            per_sample = (losses[0] - losses[1]) / (2 * step)
            assert per_sample.mean().item() == pytest.approx(scores[index], rel=1e-3)

    def test_loss_scale(self, toy_net):
        images, labels = torch.rand(6, 3, 6, 6), torch.tensor([0, 1, 2, 0, 1, 2])
        base = layer_grad_scores(toy_net, images, labels)
        scaled = layer_grad_scores(toy_net, images, labels,
                                   loss_fn=lambda out, y: 3.0 * summed_cross_entropy(out, y))
        for index in base:
            assert scaled[index] == pytest.approx(3.0 * base[index], rel=1e-5)
        channels = {0: 4, 2: 8, 4: 4}
        plan_a = select_layers(base, 5.0, 10_000, channels)
        plan_b = select_layers(scaled, 5.0, 10_000, channels)
        assert plan_a.layer_indices == plan_b.layer_indices

    def test_deterministic(self, toy_net):
        images, labels = torch.rand(4, 3, 6, 6), torch.tensor([0, 1, 2, 0])
        assert layer_grad_scores(toy_net, images, labels) == layer_grad_scores(toy_net, images, labels)

    def test_empty_batch(self, toy_net):
        with pytest.raises(PlacementError):
            layer_grad_scores(toy_net, torch.zeros(0, 3, 6, 6), torch.zeros(0, dtype=torch.long))

    def test_rejects_model_with_denoisers(self, toy_net):
        starred = attach(toy_net, [0], input_hw=(6, 6))
        with pytest.raises(PlacementError):
            layer_grad_scores(starred, torch.rand(1, 3, 6, 6), torch.tensor([0]))


class TestSelection:
    def test_hand_traced_example(self):
        plan = _example_plan()
        assert plan.budget == 4000
        assert plan.layer_indices == [1]
        assert plan.total_cost == 3376

    def test_stop_mode(self):
        plan = select_layers({0: 0.9, 1: 0.5}, 4.0, 100_000, {0: 64, 1: 10}, mode="stop",
                             cost_fn=lambda c: 5000 if c == 64 else 1000)
        assert plan.layer_indices == []
        plan = select_layers({0: 0.9, 1: 0.5}, 4.0, 100_000, {0: 64, 1: 10}, mode="skip",
                             cost_fn=lambda c: 5000 if c == 64 else 1000)
        assert plan.layer_indices == [1]

    def test_zero_eta(self):
        assert _example_plan(eta_pct=0.0).entries == []

    def test_unlimited_budget_ranks_by_score(self):
        for plan in (_example_plan(eta_pct=100.0), _example_plan(eta_pct=None)):
            assert plan.layer_indices == [1, 2, 0]
            assert plan.total_cost <= plan.budget

    def test_tie_breaks_on_index(self):
        plan = select_layers({3: 1.0, 1: 1.0}, None, 0, {1: 4, 3: 4})
        assert plan.layer_indices == [1, 3]

    def test_budget_safety(self):
        generator = torch.Generator().manual_seed(0)
        channels = {i: c for i, c in enumerate([4, 8, 16, 32, 64, 8])}
        for eta in (1.0, 3.0, 7.0, 20.0):
            scores = {i: torch.rand(1, generator=generator).item() for i in channels}
            plan = select_layers(scores, eta, 50_000, channels)
            assert plan.total_cost <= plan.budget == int(eta) * 50_000 // 100
            assert [e.score for e in plan.entries] == sorted((e.score for e in plan.entries), reverse=True)

    @pytest.mark.parametrize("eta, params, budget", [(29.0, 100, 29), (0.07, 100_000, 70), (4.1, 1000, 41),
                                                     (0.5, 3, 0), (33.3, 10, 3)])
    def test_budget_is_exact_percentage(self, eta, params, budget):
        plan = select_layers({0: 1.0}, eta, params, {0: 4}, cost_fn=lambda c: budget)
        assert plan.budget == budget
        assert plan.layer_indices == [0]
        assert select_layers({0: 1.0}, eta, params, {0: 4}, cost_fn=lambda c: budget + 1).entries == []

    def test_small_cnn_budget_fits_one_block(self, cnn):
        scores = {0: 0.2, 2: 0.3, 4: 0.9}
        plan = select_layers(scores, 4.0, cnn.backbone_parameter_count(), {0: 32, 2: 32, 4: 64})
        assert plan.budget == 1171
        assert plan.layer_indices == [2]
        assert plan.total_cost == denoiser_param_count(32) == 920

    def test_negative_eta(self):
        with pytest.raises(PlacementError):
            _example_plan(eta_pct=-1.0)


class TestPlanFile:
    def test_text_round_trip(self):
        plan = _example_plan(eta_pct=100.0)
        text = plan.to_text(seed=7)
        assert text.startswith("# seed=7\n")
        rows = [line.split() for line in text.splitlines() if not line.startswith("#")]
        assert [int(row[3]) for row in rows] == [3376, 6752, 7752]
        restored = PlacementPlan.from_text(text)
        assert restored.layer_indices == plan.layer_indices
        assert restored.budget == plan.budget
        assert [e.score for e in restored.entries] == [e.score for e in plan.entries]

    def test_empty_plan_file(self):
        restored = PlacementPlan.from_text(_example_plan(eta_pct=0.0).to_text(seed=0))
        assert restored.entries == [] and restored.eta_pct == 0.0

    def test_malformed_row(self):
        with pytest.raises(PlacementError):
            PlacementPlan.from_text("1 0.5 10\n")

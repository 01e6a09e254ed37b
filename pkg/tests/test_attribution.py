"""Integrated gradients: exactness on linear models, axioms, rendering."""

from __future__ import annotations

import numpy as np
import pytest
import torch
from torch import nn

from helpers import train_toy_relu_net
from holocheck.attribution import (completeness_gap, embedding_norm,
                                   integrated_gradients, pair_distance_target,
                                   region_mass_ratio, render_attribution)


def test_embedding_norm_is_the_batch_l2_norm():
    out = embedding_norm(torch.tensor([[3.0, 4.0], [0.0, 0.0]]))
    assert out.tolist() == [5.0, 0.0]


def test_pair_distance_target_values():
    ref = np.array([2.0, 0.0])  # normalized internally
    target = pair_distance_target(ref)
    vals = target(torch.tensor([[5.0, 0.0], [0.0, 1.0], [-3.0, 0.0]]))
    assert vals.detach().numpy() == pytest.approx([0.0, 1.0, 2.0])
    with pytest.raises(ValueError, match="zero norm"):
        pair_distance_target(np.zeros(4))


def test_linear_model_attribution_is_exact_at_any_step_count():
    """For linear F the path integral has a closed form: w * (x - x')."""
    torch.manual_seed(0)
    model = nn.Sequential(nn.Flatten(), nn.Linear(12, 1))
    model.eval()
    image = torch.randn(1, 3, 4)
    baseline = torch.randn(1, 3, 4)
    weight = model[1].weight.detach().reshape(1, 3, 4)
    want = (weight * (image - baseline)).numpy()
    for steps in (1, 4, 128):
        attr = integrated_gradients(model, image, baseline, steps=steps,
                                    target=lambda out: out[:, 0])
        assert np.allclose(attr, want, atol=1e-6), steps
    gap = completeness_gap(model, image, baseline, steps=1,
                           target=lambda out: out[:, 0])
    assert gap[0] == pytest.approx(gap[1], abs=1e-6)


def test_completeness_on_a_trained_nonlinear_net():
    net = train_toy_relu_net(steps=60)
    rng = np.random.default_rng(1)
    image = torch.tensor(rng.normal(0.0, 1.0, (3, 32, 32)),
                         dtype=torch.float32)
    attr_sum, delta = completeness_gap(net, image, steps=128)
    assert abs(attr_sum - delta) <= 0.01 * abs(delta)


def test_input_validation():
    model = nn.Sequential(nn.Flatten(), nn.Linear(12, 2))
    img = torch.randn(1, 3, 4)
    with pytest.raises(ValueError, match="steps"):
        integrated_gradients(model, img, steps=0)
    with pytest.raises(ValueError, match="C, H, W"):
        integrated_gradients(model, torch.randn(2, 1, 3, 4))
    with pytest.raises(ValueError, match="baseline shape"):
        integrated_gradients(model, img, baseline=torch.randn(1, 3, 5))


def test_constant_model_attributes_nothing():
    class Constant(nn.Module):
        def forward(self, x):
            return torch.ones(x.shape[0], 4)

    attr = integrated_gradients(Constant(), torch.randn(3, 8, 8), steps=4)
    assert np.all(attr == 0.0)


def test_region_mass_ratio_hand_cases():
    attr = np.zeros((6, 6))
    attr[1:3, 1:3] = 2.0
    region = (1, 1, 2, 2)
    assert region_mass_ratio(attr, region) == np.inf
    assert region_mass_ratio(np.zeros((6, 6)), region) == 1.0
    attr[attr == 0] = -1.0  # sign must not matter
    assert region_mass_ratio(attr, region) == pytest.approx(2.0)
    chans = np.stack([attr, attr])  # (C, H, W) input sums magnitudes
    assert region_mass_ratio(chans, region) == pytest.approx(2.0)


def test_render_attribution_overlay():
    image = np.full((8, 8, 3), 100, np.uint8)
    attr = np.zeros((8, 8))
    attr[2, 2] = 1.0
    out = render_attribution(attr, image)
    assert out.shape == image.shape and out.dtype == np.uint8
    assert not np.array_equal(out[2, 2], image[2, 2])  # hot pixel recolored
    assert np.array_equal(out[7, 7], image[7, 7])      # cold pixel untouched
    flat = render_attribution(np.zeros((8, 8)), image)
    assert np.array_equal(flat, image) and flat is not image
    with pytest.raises(ValueError, match="does not match"):
        render_attribution(np.zeros((4, 4)), image)

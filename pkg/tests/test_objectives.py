import math

import numpy as np
import pytest

from wvae.nn import VAE, RMSprop
from wvae.objectives import (
    Discriminator,
    TrainConfig,
    beta_vae_loss,
    discriminator_step,
    factor_vae_loss,
    permute_dims,
    tc_estimate,
    train,
    vae_loss,
)
from wvae.tensor import grad_check


def tiny(seed=0, pixels=16, d=2, hidden=(8,)):
    rng = np.random.default_rng(seed)
    model = VAE(pixels, d, hidden, rng=rng)
    x = rng.random((3, pixels))
    noise = rng.standard_normal((3, d))
    return model, x, noise


def constant_disc(d, logit):
    disc = Discriminator(d, (4,), np.random.default_rng(0))
    for layer in disc.layers:
        layer.weight.data[:] = 0.0
        layer.bias.data[:] = 0.0
    disc.layers[-1].bias.data[:] = logit
    return disc


def test_vae_loss_trivial_composition():
    model, x, noise = tiny()
    # zero last layers -> encoder (0, 0), decoder logits 0
    for layer in (model.encoder[-1], model.decoder[-1]):
        layer.weight.data[:] = 0.0
        layer.bias.data[:] = 0.0
    total, recon, kl = vae_loss(x, model, noise)
    assert kl.item() == 0.0
    assert total.item() == pytest.approx(16 * math.log(2), rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_vae_loss_grad_check(seed):
    model, x, noise = tiny(seed)
    assert grad_check(lambda: vae_loss(x, model, noise)[0], model.parameters()) <= 1e-4


def test_beta_one_equals_vae_bitwise():
    model, x, noise = tiny()
    a = vae_loss(x, model, noise)
    b = beta_vae_loss(x, model, noise, 1.0)
    assert all(u.data.tobytes() == v.data.tobytes() for u, v in zip(a, b))


def test_beta_linearity():
    model, x, noise = tiny()
    vt, vr, _ = vae_loss(x, model, noise)
    bt, br, _ = beta_vae_loss(x, model, noise, 4.0)
    assert bt.item() - br.item() == pytest.approx(4 * (vt.item() - vr.item()), rel=1e-12)


def test_beta_below_one_rejected():
    model, x, noise = tiny()
    with pytest.raises(ValueError):
        beta_vae_loss(x, model, noise, 0.5)


def _grads(model, loss):
    for p in model.parameters():
        p.zero_grad()
    loss.backward()
    return [p.grad.copy() for p in model.encoder[-1].parameters()]


def test_doubling_beta_doubles_kl_gradient_path():
    model, x, noise = tiny(4)
    g1 = _grads(model, beta_vae_loss(x, model, noise, 1.0)[0])
    g2 = _grads(model, beta_vae_loss(x, model, noise, 2.0)[0])
    g4 = _grads(model, beta_vae_loss(x, model, noise, 4.0)[0])
    # KL-path contribution scales linearly in beta
    for a, b, c in zip(g1, g2, g4):
        assert np.allclose(c - b, 2 * (b - a), atol=1e-10)


def test_permute_dims_single_row():
    z = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(permute_dims(z, np.random.default_rng(0)), z)


def test_permute_dims_preserves_column_multisets():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((20, 4))
    out = permute_dims(z, rng)
    assert np.array_equal(np.sort(out, axis=0), np.sort(z, axis=0))
    assert math.fsum(out.ravel()) == math.fsum(z.ravel())


def test_permute_dims_golden():
    z = np.arange(8, dtype=float).reshape(4, 2)
    out = permute_dims(z, np.random.default_rng(42))
    assert out.tolist() == GOLDEN_PERMUTE


GOLDEN_PERMUTE = [[6.0, 7.0], [4.0, 5.0], [2.0, 1.0], [0.0, 3.0]]


def test_tc_estimate_constant_disc():
    z = np.random.default_rng(0).standard_normal((5, 3))
    assert tc_estimate(z, constant_disc(3, 0.0)).item() == 0.0
    assert tc_estimate(z, constant_disc(3, 1.75)).item() == pytest.approx(1.75, rel=1e-15)


def test_tc_estimate_arithmetic_mean():
    disc = Discriminator(1, (), np.random.default_rng(0))
    disc.layers[0].weight.data[:] = 1.0
    disc.layers[0].bias.data[:] = 0.0
    assert tc_estimate(np.array([[1.0], [-1.0], [3.0]]), disc).item() == 1.0


def test_tc_estimate_non_finite():
    disc = Discriminator(1, (), np.random.default_rng(0))
    disc.layers[0].weight.data[:] = 1.0
    with pytest.raises(FloatingPointError):
        tc_estimate(np.array([[np.inf]]), disc)


def test_factor_gamma_zero_equals_vae():
    model, x, noise = tiny()
    disc = Discriminator(2, (4,), np.random.default_rng(1))
    v = vae_loss(x, model, noise)
    f = factor_vae_loss(x, model, disc, noise, 0.0)
    assert f[0].data.tobytes() == v[0].data.tobytes()


def test_factor_logit_zero_disc_equals_vae():
    model, x, noise = tiny()
    v = vae_loss(x, model, noise)
    f = factor_vae_loss(x, model, constant_disc(2, 0.0), noise, 6.4)
    assert f[0].data.tobytes() == v[0].data.tobytes()


def test_factor_grad_check_with_frozen_disc():
    model, x, noise = tiny(2)
    disc = Discriminator(2, (4,), np.random.default_rng(3))
    f = lambda: factor_vae_loss(x, model, disc, noise, 6.4)[0]
    assert grad_check(f, model.parameters()) <= 1e-4


def test_discriminator_separates_clusters():
    rng = np.random.default_rng(0)
    disc = Discriminator(2, (16, 16), rng)
    opt = RMSprop(disc.parameters(), lr=1e-3)
    accs = []
    for _ in range(200):
        real = rng.standard_normal((32, 2)) * 0.3 + 2.0
        fake = rng.standard_normal((32, 2)) * 0.3 - 2.0
        accs.append(discriminator_step(real, fake, disc, opt))
    assert accs[-1] == 1.0


def test_untrained_disc_chance_level():
    rng = np.random.default_rng(1)
    accs = []
    for seed in range(20):
        disc = Discriminator(3, (256, 256, 256), np.random.default_rng(seed))
        opt = RMSprop(disc.parameters(), lr=0.0)
        accs.append(discriminator_step(rng.standard_normal((64, 3)), rng.standard_normal((64, 3)), disc, opt))
    assert abs(np.mean(accs) - 0.5) <= 0.15


def test_discriminator_one_dimension_stays_near_chance():
    rng = np.random.default_rng(2)
    disc = Discriminator(1, (256, 256, 256), rng)
    opt = RMSprop(disc.parameters(), lr=1e-4)
    accs = []
    for _ in range(300):
        z = rng.standard_normal((64, 1)) * 1.5 + 0.3
        accs.append(discriminator_step(z, permute_dims(z, rng), disc, opt))
    assert 0.4 <= np.mean(accs[-100:]) <= 0.6


def test_train_zero_lr_leaves_params():
    images = np.random.default_rng(0).random((8, 4, 4))
    cfg = TrainConfig(hidden=(8,), latent_dim=2, epochs=1, batch_size=4, lr=0.0)
    res = train(images, cfg)
    fresh = train(images, TrainConfig(hidden=(8,), latent_dim=2, epochs=0, batch_size=4))
    assert res.model.get_flat().tobytes() == fresh.model.get_flat().tobytes()
    assert len(res.curves) == 1


@pytest.mark.parametrize("objective", ["vae", "beta_vae", "factor_vae"])
def test_train_deterministic(objective):
    images = (np.random.default_rng(0).random((40, 4, 4)) > 0.5).astype(np.uint8)
    cfg = TrainConfig(objective=objective, hidden=(8,), latent_dim=2, epochs=3, batch_size=8,
                      disc_hidden=(8,), seed=3)
    a, b = train(images, cfg), train(images, cfg)
    assert [tuple(c.__dict__.values()) for c in a.curves] == [tuple(c.__dict__.values()) for c in b.curves]
    assert a.model.get_flat().tobytes() == b.model.get_flat().tobytes()


def test_train_beta_one_matches_vae_bitwise():
    images = np.random.default_rng(0).random((24, 4, 4))
    base = dict(hidden=(8,), latent_dim=2, epochs=2, batch_size=8, seed=1)
    a = train(images, TrainConfig(objective="vae", **base))
    b = train(images, TrainConfig(objective="beta_vae", beta=1.0, **base))
    assert a.model.get_flat().tobytes() == b.model.get_flat().tobytes()


def test_train_reduces_recon_on_small_set():
    images = np.zeros((64, 6, 6))
    images[:32, :3] = 1.0
    images[32:, 3:] = 1.0
    res = train(images, TrainConfig(hidden=(32,), latent_dim=2, epochs=20, batch_size=16, lr=3e-3))
    assert res.curves[-1].recon < res.curves[0].recon


def test_train_nan_aborts_with_context():
    images = np.random.default_rng(0).random((8, 2, 2))
    cfg = TrainConfig(hidden=(4,), latent_dim=1, epochs=1, batch_size=4, lr=1e300)
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError, match="epoch 0, step"):
        train(images, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(objective="beta_vae", beta=0.5)
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=0)
    with pytest.raises(ValueError):
        TrainConfig(objective="gan")

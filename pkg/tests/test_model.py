import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from armorbench.errors import ConfigError, LabelIndexError, ShapeError
from armorbench.model import (
    Arch,
    DualEncoderModel,
    TrainConfig,
    dlr_loss,
    init_model,
    load_checkpoint,
    loss_ce,
    save_checkpoint,
    softmax,
    train,
)
from armorbench.model.losses import ce_with_grad, dlr_with_grad, loss_with_grad
from armorbench.model.training import SGD, train_step

STEP = 1e-6


def central_difference(f, step=STEP):
    """Fourth-order central difference of a scalar function at t = 0."""
    return (-f(2 * step) + 8 * f(step) - 8 * f(-step) + f(-2 * step)) / (12 * step)


@pytest.fixture
def model64():
    arch = Arch(image_shape=(3, 4, 4), hidden_dim=12, embed_dim=6, num_classes=5)
    return init_model(arch, seed=9, temperature=1.0).astype(np.float64)


@pytest.fixture
def batch():
    rng = np.random.default_rng(2)
    return rng.uniform(0.2, 0.8, size=(6, 3, 4, 4)), rng.integers(0, 5, size=6)


# Losses

def test_cross_entropy_of_uniform_logits():
    assert loss_ce(np.zeros(10), 3) == pytest.approx(np.log(10.0))


def test_cross_entropy_rejects_bad_label():
    with pytest.raises(LabelIndexError):
        loss_ce(np.zeros(3), 3)


def test_ce_gradient_is_softmax_minus_onehot():
    z = np.array([[1.0, 2.0, 0.5]])
    losses, grad = ce_with_grad(z, [1])
    expected = softmax(z)[0]
    expected[1] -= 1.0
    np.testing.assert_allclose(grad[0], expected)
    assert losses[0] == pytest.approx(loss_ce(z[0], 1))


def test_dlr_loss_value():
    assert dlr_loss([3.0, 1.0, 0.0], 0) == pytest.approx(-2.0 / 3.0)
    assert dlr_loss([0.0, 4.0, 1.0, 2.0], 0) == pytest.approx(4.0 / 3.0)


def test_dlr_needs_three_classes():
    with pytest.raises(ConfigError):
        dlr_loss([1.0, 0.0], 0)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4, unique=True), st.integers(0, 3))
def test_dlr_gradient_matches_differences(values, label):
    z = np.array(values)
    # keep the logit order stable under the perturbation
    gaps = np.diff(np.sort(z))
    if gaps.min() < 1e-2:
        return
    _, grad = dlr_with_grad(z, label)
    direction = np.random.default_rng(0).normal(size=4)
    numeric = central_difference(lambda t: dlr_loss(z + t * direction, label), step=1e-4)
    assert numeric == pytest.approx(grad @ direction, rel=1e-5, abs=1e-8)


# Dual encoder

def test_softmax_rows_sum_to_one():
    p = softmax(np.array([[1000.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    np.testing.assert_allclose(p[1], [0.5, 0.5])


def test_encode_gives_unit_vectors(tiny_model, tiny_dataset):
    u = tiny_model.encode(tiny_dataset.images[:5])
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, rtol=1e-9)


def test_logits_are_bounded_by_temperature(tiny_model, tiny_dataset):
    z = tiny_model.logits(tiny_dataset.images)
    assert np.abs(z).max() <= tiny_model.temperature + 1e-9


def test_single_and_batch_logits_agree(tiny_model, tiny_dataset):
    batch_logits = tiny_model.logits(tiny_dataset.images[:3])
    np.testing.assert_allclose(tiny_model.logits(tiny_dataset.images[1]), batch_logits[1])
    assert tiny_model.predict(tiny_dataset.images[1]) == int(np.argmax(batch_logits[1]))


def test_predict_breaks_ties_towards_lowest_class(tiny_model, tiny_dataset):
    params = dict(tiny_model.params)
    params["E"] = np.ones_like(params["E"])
    tied = DualEncoderModel(tiny_model.arch, params)
    assert list(tied.predict(tiny_dataset.images[:4])) == [0, 0, 0, 0]


def test_model_rejects_wrong_input_shape(tiny_model):
    with pytest.raises(ShapeError):
        tiny_model.logits(np.zeros((2, 3, 4, 4)))


def test_model_rejects_nonpositive_temperature(tiny_model):
    with pytest.raises(ConfigError):
        DualEncoderModel(tiny_model.arch, tiny_model.params, temperature=0.0)


SEEDS = range(10)


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("kind", ["ce", "dlr"])
def test_input_gradient_matches_differences(model64, seed, kind):
    rng = np.random.default_rng(100 + seed)
    image = rng.uniform(0.2, 0.8, size=(3, 4, 4))
    label = int(rng.integers(0, 5))
    _, grad, _ = model64.loss_grad(image, label, kind)
    direction = rng.normal(size=image.shape)
    numeric = central_difference(lambda t: loss_with_grad(model64.logits(image + t * direction), label, kind)[0])
    assert numeric == pytest.approx(np.sum(grad * direction), rel=1e-4, abs=1e-9)


def test_logit_jacobian_rows_are_vjps(model64, batch):
    image = batch[0][0]
    _, jac = model64.logit_jacobian(image)
    for k in range(model64.num_classes):
        np.testing.assert_allclose(jac[k], model64.vjp(image, np.eye(model64.num_classes)[k]), atol=1e-12)


@pytest.mark.parametrize("seed", SEEDS)
def test_parameter_gradients_match_differences(model64, seed):
    rng = np.random.default_rng(200 + seed)
    images = rng.uniform(0.2, 0.8, size=(6, 3, 4, 4))
    labels = rng.integers(0, 5, size=6)
    _, grads = model64.batch_loss_grads(images, labels)
    base = model64.working_parameters()

    for name, value in base.items():
        direction = rng.normal(size=value.shape)

        def loss_along(t):
            perturbed = model64.copy()
            perturbed.set_parameters(dict(base, **{name: value + t * direction}))
            return perturbed.batch_loss_grads(images, labels)[0]

        assert central_difference(loss_along) == pytest.approx(np.sum(grads[name] * direction), rel=1e-4, abs=1e-9)

    def loss_at_temperature(t):
        perturbed = model64.copy()
        perturbed.set_parameters(base, temperature=1.0 + t)
        return perturbed.batch_loss_grads(images, labels)[0]

    assert central_difference(loss_at_temperature) == pytest.approx(grads["temperature"], rel=1e-4, abs=1e-9)


def test_init_is_seeded():
    arch = Arch(image_shape=(3, 4, 4), hidden_dim=8, embed_dim=4, num_classes=3)
    a, b, c = init_model(arch, 1), init_model(arch, 1), init_model(arch, 2)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
    assert not np.array_equal(a.params["W1"], c.params["W1"])
    assert np.all(a.params["b1"] == 0.0)


# Checkpoints

def test_checkpoint_round_trip_is_exact(tmp_path, tiny_model, tiny_dataset):
    path = tmp_path / "model.avlm"
    save_checkpoint(tiny_model, path)
    loaded = load_checkpoint(path)
    for name, value in tiny_model.params.items():
        np.testing.assert_array_equal(loaded.params[name], value)
    assert loaded.temperature == tiny_model.temperature
    assert loaded.class_names == tiny_model.class_names
    assert loaded.arch == tiny_model.arch
    np.testing.assert_array_equal(loaded.logits(tiny_dataset.images), tiny_model.logits(tiny_dataset.images))

    again = tmp_path / "again.avlm"
    save_checkpoint(loaded, again)
    assert again.read_bytes() == path.read_bytes()


# Training

@pytest.mark.parametrize("seed", range(20))
def test_single_sample_step_lowers_its_loss(model64, seed):
    rng = np.random.default_rng(300 + seed)
    image = rng.uniform(size=(1, 3, 4, 4))
    label = [int(rng.integers(5))]
    before = model64.batch_loss_grads(image, label)[0]
    model64, reported = train_step(model64, image, label, SGD(1e-3, momentum=0.0))
    assert reported == before
    assert model64.batch_loss_grads(image, label)[0] < before


def test_training_is_deterministic(tiny_model, tiny_dataset):
    config = TrainConfig(epochs=2, batch_size=16, lr=0.05, seed=1)
    a, records_a = train(tiny_model, tiny_dataset, config)
    b, records_b = train(tiny_model, tiny_dataset, config)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
    assert [r.train_loss for r in records_a] == [r.train_loss for r in records_b]
    assert len(records_a) == 2


def test_training_does_not_touch_the_input_model(tiny_model, tiny_dataset):
    before = {name: value.copy() for name, value in tiny_model.params.items()}
    train(tiny_model, tiny_dataset, TrainConfig(epochs=1, batch_size=16, seed=0))
    for name, value in before.items():
        np.testing.assert_array_equal(tiny_model.params[name], value)


def test_zero_learning_rate_keeps_parameters(tiny_model, tiny_dataset):
    trained, _ = train(tiny_model, tiny_dataset, TrainConfig(epochs=1, batch_size=16, lr=0.0, seed=0))
    for name, value in tiny_model.params.items():
        np.testing.assert_array_equal(trained.params[name], value)


def test_zero_epochs(tiny_model, tiny_dataset):
    trained, records = train(tiny_model, tiny_dataset, TrainConfig(epochs=0))
    assert records == []
    np.testing.assert_array_equal(trained.params["W1"], tiny_model.params["W1"])


def test_adam_training_runs_and_records_accuracy(tiny_model, tiny_dataset):
    config = TrainConfig(epochs=2, batch_size=20, lr=0.01, optimizer="adam", seed=0)
    trained, records = train(tiny_model, tiny_dataset, config, val_clean=tiny_dataset)
    assert trained.all_finite()
    assert all(0.0 <= r.clean_val_acc <= 1.0 for r in records)
    assert all(r.adv_val_acc is None for r in records)


def test_learnable_temperature_moves(tiny_dataset):
    arch = Arch(image_shape=(3, 8, 8), hidden_dim=16, embed_dim=8, num_classes=3, train_temperature=True)
    model = init_model(arch, seed=3)
    trained, _ = train(model, tiny_dataset, TrainConfig(epochs=1, batch_size=20, seed=0))
    assert trained.temperature != model.temperature
    assert trained.temperature > 0.0


def test_step_decay_schedule():
    config = TrainConfig(lr=0.1, lr_decay_every=2, lr_decay_gamma=0.5)
    assert [config.lr_at(e) for e in range(5)] == pytest.approx([0.1, 0.1, 0.05, 0.05, 0.025])


@pytest.mark.parametrize("kwargs", [{"epochs": -1}, {"batch_size": 0}, {"optimizer": "rmsprop"}, {"momentum": 1.0}])
def test_train_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)

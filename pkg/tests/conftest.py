"""Shared fixtures; the expensive desk-scale trained model is session-scoped."""

import numpy as np
import pytest

from nsfm.channels import ClusterChannelConfig, generate_dataset, normalize_dataset, split_dataset
from nsfm.config import ExperimentConfig
from nsfm.flow import init_velocity_net, train


@pytest.fixture(scope="session")
def desk_model():
    """Default desk-scale dataset and a trained prior, shared across test modules.

    Matches the documented default experiment: Nr=16, Nt=8, 3 clusters,
    5000 samples split 4000/1000.  Training takes a few minutes once per
    pytest session.
    """
    cfg = ExperimentConfig()
    ds = split_dataset(
        normalize_dataset(generate_dataset(cfg.channel, cfg.samples)),
        cfg.train_fraction,
        cfg.seed,
    )
    assert (ds.train_count, ds.test_count) == (4000, 1000)
    net = init_velocity_net(
        2 * cfg.channel.nr * cfg.channel.nt,
        hidden_dims=cfg.hidden_dims,
        time_embed_dim=cfg.time_embed_dim,
        seed=cfg.train.seed,
    )
    net, curve = train(net, ds, cfg.train, verbose=True)
    return {"cfg": cfg, "net": net, "dataset": ds, "loss_curve": curve}

"""
From sensor CSV to congestion levels
====================================

Generate ten days of synthetic 5-minute sensor data, clean it, window it
into lagged feature vectors, train a model and score it against a
constant-mean predictor on the held-out final two days.
"""

import numpy as np

from deeprbf.config import RunConfig
from deeprbf.data import preprocess, synth_generate
from deeprbf.metrics import constant_predictor, evaluate
from deeprbf.network import init_network
from deeprbf.training import train

cfg = RunConfig()
raw = synth_generate(cfg.synth, seed=cfg.seed)
print(len(raw), "observations;", "events:", sorted({o.event for o in raw.observations}))

prep = preprocess(raw, cfg.features, cfg.clean, seed=cfg.seed)
print("clean report:", prep.clean_report.to_dict())
print("features:", ", ".join(prep.train.feature_names))
print("train/test windows:", len(prep.train), len(prep.test))

X, Y = prep.train.X, prep.train.y
net = init_network(cfg.network.spec(X.shape[1]), np.random.default_rng(cfg.seed), "sample_from_data", data=X)
net, hist = train(net, X, Y, cfg.training.build(cfg.seed))
print(f"train loss {hist.train_loss[0]:.4f} -> {hist.train_loss[-1]:.4f}")

baseline = constant_predictor(X.shape[1], float(Y.mean()))
for name, model in (("model", net), ("constant mean", baseline)):
    reg = evaluate(model, prep.test, "regression", prep.target_stats)
    cls = evaluate(model, prep.test, "congestion_classification", prep.target_stats,
                   cfg.traffic.profile, cfg.traffic.thresholds)
    print(f"{name:>14}: MAE {reg.mae:6.1f} veh/h | accuracy {cls.accuracy:.3f} | macro F1 {cls.f1:.3f}")

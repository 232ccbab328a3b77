#!/usr/bin/env python3
"""Train the two toy ANN fixtures and export them in the tmn JSON formats.

Outputs (under crates/core/fixtures/):
  mlp/network.json     2-16-16-3 MLP on synthetic 2-D three-class data
  mlp/calib.json       calibration batches (4 x 100 training samples)
  mlp/test.json        600 held-out labelled samples
  cnn/network.json     small CNN on the 8x8 sklearn digits
  cnn/calib.json       calibration batches (4 x 128 training samples)
  cnn/test.json        360 held-out labelled digits

Training is deterministic (fixed seeds, CPU only). Usage:
  python3 tools/train_fixtures.py
"""

import json
import math
import os

import numpy as np
import torch
from torch import nn
from sklearn.datasets import load_digits

ROOT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures")


def flat(t):
    return [float(v) for v in t.detach().cpu().numpy().astype(np.float64).ravel()]


def dump(path, obj):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, separators=(",", ":"))
        f.write("\n")


def dataset(sample_shape, batches):
    return {
        "format": "tmn-dataset",
        "version": 1,
        "sample_shape": list(sample_shape),
        "batches": batches,
    }


def batch(xs, ys):
    return {
        "inputs": [[float(v) for v in np.asarray(x, dtype=np.float64).ravel()] for x in xs],
        "labels": [int(y) for y in ys],
    }


def train(model, x, y, epochs, lr, wd):
    opt = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=wd)
    loss_fn = nn.CrossEntropyLoss()
    n = x.shape[0]
    g = torch.Generator().manual_seed(7)
    for _ in range(epochs):
        perm = torch.randperm(n, generator=g)
        for i in range(0, n, 64):
            idx = perm[i : i + 64]
            opt.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            opt.step()


def accuracy(model, x, y):
    with torch.no_grad():
        return (model(x).argmax(1) == y).float().mean().item()


def blobs(rng, n):
    ys = rng.integers(0, 3, size=n)
    ang = 2 * math.pi * ys / 3
    centers = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    xs = centers + 0.35 * rng.standard_normal((n, 2))
    return xs.astype(np.float32), ys


def mlp():
    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    xtr, ytr = blobs(rng, 2000)
    xte, yte = blobs(rng, 600)
    model = nn.Sequential(
        nn.Linear(2, 16), nn.ReLU(), nn.Linear(16, 16), nn.ReLU(), nn.Linear(16, 3)
    ).double()
    xt = torch.tensor(xtr, dtype=torch.float64)
    yt = torch.tensor(ytr)
    train(model, xt, yt, epochs=60, lr=1e-2, wd=1e-4)
    print("mlp test acc", accuracy(model, torch.tensor(xte, dtype=torch.float64), torch.tensor(yte)))
    l1, _, l2, _, l3 = model
    net = {
        "format": "tmn-network",
        "version": 1,
        "input_shape": [2],
        "layers": [
            {"kind": "dense", "in_features": 2, "out_features": 16, "weights": flat(l1.weight), "bias": flat(l1.bias)},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 16, "out_features": 16, "weights": flat(l2.weight), "bias": flat(l2.bias)},
            {"kind": "relu"},
            {"kind": "dense", "in_features": 16, "out_features": 3, "weights": flat(l3.weight), "bias": flat(l3.bias)},
        ],
    }
    dump(os.path.join(ROOT, "mlp", "network.json"), net)
    dump(
        os.path.join(ROOT, "mlp", "calib.json"),
        dataset([2], [batch(xtr[i * 100 : (i + 1) * 100], ytr[i * 100 : (i + 1) * 100]) for i in range(4)]),
    )
    dump(os.path.join(ROOT, "mlp", "test.json"), dataset([2], [batch(xte, yte)]))


def cnn():
    torch.manual_seed(1)
    digits = load_digits()
    x = (digits.images / 16.0).astype(np.float64)
    y = digits.target
    rng = np.random.default_rng(1)
    perm = rng.permutation(len(y))
    tr, te = perm[:1437], perm[1437:]
    model = nn.Sequential(
        nn.Conv2d(1, 8, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
        nn.Conv2d(8, 16, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
        nn.Flatten(), nn.Linear(64, 10),
    ).double()
    xt = torch.tensor(x[tr][:, None])
    yt = torch.tensor(y[tr])
    train(model, xt, yt, epochs=80, lr=3e-3, wd=1e-4)
    print("cnn test acc", accuracy(model, torch.tensor(x[te][:, None]), torch.tensor(y[te])))
    c1, _, _, c2, _, _, _, fc = model

    def conv(c):
        o, i, kh, kw = c.weight.shape
        return {
            "kind": "conv2d", "in_channels": i, "out_channels": o, "kernel": [kh, kw],
            "stride": 1, "pad": 1, "weights": flat(c.weight), "bias": flat(c.bias),
        }

    net = {
        "format": "tmn-network",
        "version": 1,
        "input_shape": [1, 8, 8],
        "layers": [
            conv(c1), {"kind": "relu"}, {"kind": "avgpool", "kernel": 2, "stride": 2},
            conv(c2), {"kind": "relu"}, {"kind": "avgpool", "kernel": 2, "stride": 2},
            {"kind": "flatten"},
            {"kind": "dense", "in_features": 64, "out_features": 10, "weights": flat(fc.weight), "bias": flat(fc.bias)},
        ],
    }
    dump(os.path.join(ROOT, "cnn", "network.json"), net)
    xtr, ytr = x[tr], y[tr]
    dump(
        os.path.join(ROOT, "cnn", "calib.json"),
        dataset([1, 8, 8], [batch(xtr[i * 128 : (i + 1) * 128], ytr[i * 128 : (i + 1) * 128]) for i in range(4)]),
    )
    dump(os.path.join(ROOT, "cnn", "test.json"), dataset([1, 8, 8], [batch(x[te], y[te])]))


if __name__ == "__main__":
    mlp()
    cnn()

"""
Checking the hand-written gradients
===================================

Backpropagation through the LSTM and the shared feed-forward network is
written by hand, so it is checked against central differences. The relative
error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8), maximised
over every parameter.
"""
import dataclasses

import numpy as np

from flowdisagg import TrainConfig, build_windows
from flowdisagg.disagg import fit_scalers, init_model, loss_and_grad_fn
from flowdisagg.ingest import SynthConfig, synth_generate
from flowdisagg.neuralnet import gradcheck

data = synth_generate(SynthConfig(n_days=40, seed=3))
windows = build_windows(data.daily_weather, data.daily_flow, data.hourly_weather, data.hourly_flow)
model = init_model(("precipitation", "temperature"), fit_scalers(windows),
                   TrainConfig(hidden_size=4, ffn_hidden=(8, 8), seed=11))
params = model.parameters()
n = sum(a.size for a in params.values())
for name, a in params.items():
    print(f"{name:8s} {a.shape}")

fn = loss_and_grad_fn(model, windows[:4])
print(f"max relative error over {n} parameters:", gradcheck(fn, params, epsilon=1e-5, max_params=n))

# The daily and hourly branches share one network. Switching off the hourly
# loss must make the hourly weather irrelevant to every gradient.
_, g1 = loss_and_grad_fn(model, windows[:1], (1.0, 0.0))(params)
w = windows[0]
shuffled = dataclasses.replace(w, target_hourly_weather=w.target_hourly_weather[::-1])
_, g2 = loss_and_grad_fn(model, [shuffled], (1.0, 0.0))(params)
print("hourly weather affects gradients without loss 2:", any(not np.array_equal(g1[k], g2[k]) for k in g1))


# A deliberately broken gradient is caught.
def broken(arrays):
    loss, grads = fn(arrays)
    grads = dict(grads)
    grads["ffn.W1"] = grads["ffn.W1"] * 1.01
    return loss, grads


print("broken gradient error:", gradcheck(broken, params, epsilon=1e-5, max_params=n))

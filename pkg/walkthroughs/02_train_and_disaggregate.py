"""
Training the disaggregation model
=================================

Each training example is a day plus the six days before it. An LSTM reads the
six context days (daily weather and daily flow) and its final hidden state is
joined to one weather row before a small feed-forward network.

* with the target day's daily weather the network predicts the daily flow;
* with each of its 24 hourly weather rows it predicts an hourly flow, and only
  the mean of those 24 values is compared with the daily flow.

No hourly flow is used for training.
"""
import numpy as np

from flowdisagg import TrainConfig, build_windows, compute_losses, disaggregate_day, split_windows, train
from flowdisagg.ingest import SynthConfig, synth_generate

data = synth_generate(SynthConfig())
windows = build_windows(data.daily_weather, data.daily_flow, data.hourly_weather, data.hourly_flow)
train_w, test_w = split_windows(windows, 0.8)
print(f"{len(windows)} windows: {len(train_w)} train, {len(test_w)} test")
print("context block shape:", windows[0].context.shape)

config = TrainConfig()
model, history = train(train_w, config)
for epoch in (0, 50, 100, 200, len(history) - 1):
    h = history[epoch]
    print(f"epoch {epoch:3d}  loss1 {h.loss1:.4f}  loss2 {h.loss2:.4f}  total {h.total:.4f}")
print("test-split losses:", compute_losses(model, test_w))

# Disaggregate one test day. The raw hourly output is shifted by one constant
# so that its mean equals the observed daily average.
result = disaggregate_day(model, test_w[10])
print("day:", result.day_id, "observed daily average:", round(result.daily_avg_observed, 4))
print("raw mean:      ", result.hourly_flow_raw.mean())
print("corrected mean:", result.hourly_flow_corrected.mean())
print("shift applied: ", np.unique(np.round(result.hourly_flow_corrected - result.hourly_flow_raw, 12)))
print("hour  corrected   truth")
for hour in range(0, 24, 3):
    print(f"{hour:4d}  {result.hourly_flow_corrected[hour]:9.4f}  {result.hourly_flow_truth[hour]:7.4f}")

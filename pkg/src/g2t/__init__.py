"""g2t: word-gesture keyboard decoding toolkit.

Converts swipe trajectories over a QWERTY layout into ranked word
predictions via either SHARK2 template matching or a coarse-discretized
BiLSTM+CTC neural decoder, with a synthetic-data training pipeline,
evaluation metrics, a CLI, and a local HTTP decode service.
"""

__version__ = "0.1.0"

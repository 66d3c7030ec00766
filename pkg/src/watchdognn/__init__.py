"""Guarded image classification with an autoencoder watchdog.

Trains a convolutional autoencoder and a CNN classifier on MNIST-format
data, gates classifier inputs by reconstruction distance against a
calibrated threshold, and evaluates the gate with score distributions, ROC
curves, and unrecognized-image counts.
"""

__version__ = "0.1.0"

"""Command handlers for the csaeo CLI"""
from csaeo.harness.train import train_handler
from csaeo.harness.sweep import sweep_handler
from csaeo.harness.ser import ser_curve_handler
from csaeo.harness.csa import compare_csa_handler
from csaeo.harness.probe import channel_probe_handler
from csaeo.harness.confusion import confusion_handler

__all__ = [
    # Codec
    "train_handler",
    # Experiments
    "sweep_handler",
    "compare_csa_handler",
    "confusion_handler",
    # Link diagnostics
    "ser_curve_handler",
    "channel_probe_handler",
]

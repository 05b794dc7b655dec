"""
ArmorBench - an adversarial robustness workbench.

Gradient attacks and their hybrids against a small dual-encoder image
classifier, adversarial fine-tuning, and boosted-tree and neural-network
detectors over the encoder's features.
"""

__version__ = '0.1.0'

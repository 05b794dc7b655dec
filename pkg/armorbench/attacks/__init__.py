"""Adversarial attacks: FGSM, DeepFool, APGD / AutoAttack-lite and the two hybrids."""

from .base import ATTACK_KINDS, KIND_CHAINS, AdvExample, AttackConfig, make_example, project_linf
from .deepfool import deepfool
from .gradient import apgd, autoattack_lite, fgsm
from .hybrid import fuse, fused_attack, sequential_attack
from .runner import attack_sample, attack_success_rate, generate_attacks
from .storage import load_adversarial_set, save_adversarial_set

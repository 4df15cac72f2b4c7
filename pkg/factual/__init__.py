"""
FACTUAL: supervised adversarial contrastive learning for SAR target recognition.
"""

__version__ = "0.1.0"

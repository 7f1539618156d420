"""Joint short/long answer extraction pipeline for Natural Questions.

Stages: ``corpus`` (records) -> ``tokenizer`` -> ``instances`` (windows and
targets) -> ``scorer`` (logits) -> ``decoder`` (predictions) -> ``evaluator``.
"""

__version__ = "0.1.0"

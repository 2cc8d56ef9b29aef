"""Generative question answering over 3D object proposals.

Subpackages:
  data     -- dataset/proposal loading, vocabulary, synthetic scene generator
  metrics  -- BLEU / ROUGE-L / CIDEr-D scorers (compiled kernels + fallback)
  model    -- transformer encoder-decoder with object localization head
  decode   -- greedy and beam-search generation
  train    -- XE and self-critical (policy gradient) training engines
"""

__version__ = "0.1.0"

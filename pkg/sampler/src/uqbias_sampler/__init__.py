"""Corpus producer for the uqbias evaluation engine.

Draws epsilon-sampled translations with sequence log-probabilities,
computes sentence embeddings, pairwise entailment probabilities, focus-noun
gender labels, and quality scores, then writes the engine's documented file
contract. The engine is only ever touched through those files and its
`validate` command.
"""

__version__ = "0.1.0"

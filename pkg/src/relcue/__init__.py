"""Training-free visual relation classification engine.

Classifies the relation between annotated object pairs by aggregating
similarities between decomposed visual features (subject crop, object crop,
simulated spatial image) and description prompts generated by a language
model.
"""

__version__ = "0.1.0"

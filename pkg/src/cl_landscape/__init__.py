"""Compressive learning from random Fourier sketches.

Sketch a dataset once, then decode k-means centroids or a diagonal GMM from
the sketch alone with CLOMPR-family or genetic decoders, and probe how the
sketch-matching landscape behaves as sketch size and frequency scale vary.
"""

from .decoders import DecodeOptions, DecodeResult, GeneticOptions, clompr, clompr_multi, geneticl
from .model import Dataset, MixtureModel, ModelKind
from .sketch import (
    FrequencyLaw,
    FrequencyMatrix,
    Sketch,
    atom_correlation,
    cost,
    cost_gradient,
    draw_frequencies,
    empirical_sketch,
    merge_sketches,
    model_sketch,
    scale_heuristic,
)

__version__ = "0.1.0"

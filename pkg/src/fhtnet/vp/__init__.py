"""Vanishing point task: data, evaluation, corruption and the classical baseline."""
from .classical import VPEstimate, backprojection_map, classical_candidates, classical_vp, edge_filter
from .corrupt import CorruptionSpec, blur_corrupt, corruption_sweep
from .evaluate import EvalReport, evaluate, grid_cell, network_candidates, network_heatmaps, predict_vp, topk_cells, topk_error
from .synth import Dataset, Sample, SynthConfig, SynthConfigError, load_dataset, synth_generate, write_dataset

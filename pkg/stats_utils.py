#!/usr/bin/env python3
"""
Statistics utilities for the Canny shader emulator
Timing spreads for pass reports and similarity scores for edge maps
"""

import numpy as np
from typing import Dict, Sequence, Tuple
import logging

logger = logging.getLogger(__name__)


def mean_and_std(samples: Sequence[float]) -> Tuple[float, float]:
    """
    Mean and sample standard deviation (ddof=1)
    A single sample has a spread of 0
    """
    if len(samples) == 0:
        return 0.0, 0.0

    values = np.asarray(samples, dtype=np.float64)
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def fps_from_frame_times(frame_ms: Sequence[float]) -> Tuple[float, float]:
    """Frames per second (mean ± sample std) from per-frame milliseconds"""
    rates = [1000.0 / ms if ms > 0 else float('inf') for ms in frame_ms]
    return mean_and_std(rates)


def precision_recall_f1(predicted: np.ndarray, truth: np.ndarray) -> Dict[str, float]:
    """
    Compare two boolean masks of the same shape
    Two empty sets are a perfect match; an empty prediction has precision 1.0
    """
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError(f"Mask shapes differ: {predicted.shape} vs {truth.shape}")

    true_pos = int(np.count_nonzero(predicted & truth))
    pred_count = int(np.count_nonzero(predicted))
    truth_count = int(np.count_nonzero(truth))

    if pred_count == 0 and truth_count == 0:
        return {'precision': 1.0, 'recall': 1.0, 'f1': 1.0,
                'true_positives': 0, 'predicted': 0, 'truth': 0}

    precision = true_pos / pred_count if pred_count else 1.0
    recall = true_pos / truth_count if truth_count else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    return {
        'precision': precision,
        'recall': recall,
        'f1': f1,
        'true_positives': true_pos,
        'predicted': pred_count,
        'truth': truth_count,
    }

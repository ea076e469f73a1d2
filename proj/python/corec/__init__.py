"""Similarity-based clustering and co-clustering matrix completion."""

from ._corec import (
    ClusterModel,
    CompletedMatrix,
    GeneratedInstance,
    MaskSplit,
    PreferenceMatrix,
    RatingMatrix,
    SimilarityTable,
    SynthConfig,
    build_similarity_table,
    co_rating,
    cor,
    diff_pref_agree_prob,
    estimate_cluster_size,
    estimate_set_size,
    expected_co_rating,
    expected_observations,
    expected_similarity,
    flip_noise,
    generate_instance,
    hcor,
    hicr,
    hucr,
    icr,
    load_ratings,
    modified_normalized_similarity,
    normalized_similarity,
    paf,
    phase_sweep,
    quantize_binary,
    run_protocol,
    same_pref_agree_prob,
    similarity,
    split_mask,
    thresholds,
    ucr,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

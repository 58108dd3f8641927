from .errors import DatasetError
from .graphs import (
    SBM_FEATURE_KINDS,
    GraphDataset,
    GraphSplit,
    gen_sbm,
    load_graph_dataset,
    preprocess_graph,
    row_normalize,
    sample_graph_split,
    save_graph_dataset,
)
from .synthetic import (
    SYNTHETIC_GENERATORS,
    XOR_CENTERS,
    XOR_CLASSES,
    FewShotFeatures,
    gen_circle,
    gen_fewshot_features,
    gen_moon,
    gen_spiral,
    gen_structured_clusters,
    gen_xor,
)

__all__ = [
    "DatasetError",
    "FewShotFeatures",
    "GraphDataset",
    "GraphSplit",
    "SBM_FEATURE_KINDS",
    "SYNTHETIC_GENERATORS",
    "XOR_CENTERS",
    "XOR_CLASSES",
    "gen_circle",
    "gen_fewshot_features",
    "gen_moon",
    "gen_sbm",
    "gen_spiral",
    "gen_structured_clusters",
    "gen_xor",
    "load_graph_dataset",
    "preprocess_graph",
    "row_normalize",
    "sample_graph_split",
    "save_graph_dataset",
]

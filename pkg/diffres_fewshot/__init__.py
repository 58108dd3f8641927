from .episodes import (
    Episode,
    read_features_csv,
    sample_episodes,
    summarize_accuracies,
    write_episode_results,
    write_features_csv,
    write_summary_json,
)
from .errors import FewShotError
from .methods import (
    EpisodeConfig,
    Method,
    Prediction,
    episode_prototypes,
    laplacian_label_propagation,
    nearest_prototype,
    propagation_objective,
    run_episode,
    transform_episode,
)
from .transforms import (
    Prototypes,
    center_normalize,
    class_prototypes,
    cross_domain_shift,
    nearest_assignment,
    rectify_prototypes,
)

__all__ = [
    "Episode",
    "EpisodeConfig",
    "FewShotError",
    "Method",
    "Prediction",
    "Prototypes",
    "center_normalize",
    "class_prototypes",
    "cross_domain_shift",
    "episode_prototypes",
    "laplacian_label_propagation",
    "nearest_assignment",
    "nearest_prototype",
    "propagation_objective",
    "read_features_csv",
    "rectify_prototypes",
    "run_episode",
    "sample_episodes",
    "summarize_accuracies",
    "transform_episode",
    "write_episode_results",
    "write_features_csv",
    "write_summary_json",
]

"""Location- and sentiment-aware latent model for check-in data.

Collapsed Gibbs inference over per-record topics, sentiments and regions,
plus top-k item recommendation and target user discovery on the fitted
model.
"""

from .corpus import (
    CheckinCorpus,
    CheckinRecord,
    CorpusError,
    GeoPoint,
    Vocabulary,
    build_corpus,
    infer_home_location,
    parse_checkin_file,
    split_train_test,
    write_checkin_file,
)
from .evaluation import (
    EvalReport,
    Scenario,
    accuracy_at_k,
    classify_scenario,
    evaluate_items,
    evaluate_users,
    precision_at_k,
)
from .geo import RegionGaussian, fit_region_gaussian, gaussian_pdf, haversine_km, kmeans_regions
from .lexicon import SeedLexicon, default_lexicon, load_lexicon
from .model import ModelError, ModelParams, TrainedModel, estimate_parameters, load_model, save_model
from .sampler import (
    HyperParams,
    complete_data_log_posterior,
    conditional_region,
    conditional_topic_sentiment,
    gibbs_sweep,
    init_state,
    train,
)
from .scoring import (
    ItemQuery,
    RankedList,
    UserQuery,
    discover_users,
    recommend_items,
    region_prior,
    score_item,
    score_user,
    user_prior,
)
from .synth import (
    TrueParams,
    align_topics,
    generate_corpus,
    random_truth,
    recovery_report,
    separated_truth,
)

__all__ = [
    "CheckinCorpus",
    "CheckinRecord",
    "CorpusError",
    "GeoPoint",
    "Vocabulary",
    "build_corpus",
    "infer_home_location",
    "parse_checkin_file",
    "split_train_test",
    "write_checkin_file",
    "EvalReport",
    "Scenario",
    "accuracy_at_k",
    "classify_scenario",
    "evaluate_items",
    "evaluate_users",
    "precision_at_k",
    "HyperParams",
    "complete_data_log_posterior",
    "conditional_region",
    "conditional_topic_sentiment",
    "gibbs_sweep",
    "init_state",
    "train",
    "ItemQuery",
    "RankedList",
    "UserQuery",
    "discover_users",
    "recommend_items",
    "region_prior",
    "score_item",
    "score_user",
    "user_prior",
    "TrueParams",
    "align_topics",
    "generate_corpus",
    "random_truth",
    "recovery_report",
    "separated_truth",
    "RegionGaussian",
    "fit_region_gaussian",
    "gaussian_pdf",
    "haversine_km",
    "kmeans_regions",
    "SeedLexicon",
    "default_lexicon",
    "load_lexicon",
    "ModelError",
    "ModelParams",
    "TrainedModel",
    "estimate_parameters",
    "load_model",
    "save_model",
]

__version__ = "0.1.0"

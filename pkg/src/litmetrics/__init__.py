"""litmetrics: article-level indicators for literature reviews.

Four indicators over scholarly metadata (topic-normalized citation success,
impact evolution, reference quality, review update urgency), backed by
retrieval clients, a SQLite snapshot store, content-feature extraction, and
batch statistics.
"""

from .indicators import (
    AgingPolynomial,
    BezierTrend,
    CitationSeries,
    ExponentialFit,
    IndicatorReport,
    RqmInputs,
    RuiWeights,
    arq,
    bezier_tangent,
    cdr,
    fit_exponential_mle,
    iei_average,
    iei_instantaneous,
    iei_weighted,
    kl_divergence,
    median_semesters,
    normalized_edit_distance,
    optimize_beta,
    rad,
    rqm,
    rqm_value,
    rui,
    tncsi,
)
from .pipeline import ScoringEngine, enrich, harvest, score_batch
from .retrieval import (
    ArxivClient,
    LazyPaper,
    LlmHttpClient,
    PaperRecord,
    SemanticScholarClient,
    StubLlm,
    TopicContext,
    arxiv_review_query,
    count_relevant,
    fetch_arxiv_candidates,
    fetch_monthly_citations,
    fetch_topic_sample,
    llm_topic_keyword,
)
from .snapshot import FeatureVector, SnapshotStore

__version__ = "0.1.0"

__all__ = [
    "AgingPolynomial",
    "ArxivClient",
    "BezierTrend",
    "CitationSeries",
    "ExponentialFit",
    "FeatureVector",
    "IndicatorReport",
    "LazyPaper",
    "LlmHttpClient",
    "PaperRecord",
    "RqmInputs",
    "RuiWeights",
    "ScoringEngine",
    "SemanticScholarClient",
    "SnapshotStore",
    "StubLlm",
    "TopicContext",
    "arq",
    "arxiv_review_query",
    "bezier_tangent",
    "cdr",
    "count_relevant",
    "enrich",
    "fetch_arxiv_candidates",
    "fetch_monthly_citations",
    "fetch_topic_sample",
    "fit_exponential_mle",
    "harvest",
    "iei_average",
    "iei_instantaneous",
    "iei_weighted",
    "kl_divergence",
    "llm_topic_keyword",
    "median_semesters",
    "normalized_edit_distance",
    "optimize_beta",
    "rad",
    "rqm",
    "rqm_value",
    "rui",
    "score_batch",
    "tncsi",
]

"""Document clustering with cluster-local and corpus-global topics.

The main entry points: load_bow / sample_corpus to get a Corpus,
HyperConfig + fit to train, infer_doc_states + predict_cluster to
cluster new documents, top_words to inspect topics, fit_lda / kmeans /
lda_kmeans for baselines, and clustering_accuracy / nmi to score.
"""

from .baselines import (
    LdaModel,
    fit_lda,
    kmeans,
    lda_kmeans,
    lda_naive_cluster,
    theta_kmeans,
)
from .corpus import (
    Corpus,
    Document,
    Vocabulary,
    count_matrix,
    load_bow,
    load_labels,
    load_vocab,
    save_bow,
    save_labels,
    save_vocab,
    tfidf_vectors,
)
from .errors import (
    ConfigError,
    CorpusFormatError,
    DegenerateInputError,
    DimensionError,
    EstimationError,
    NumericalError,
)
from .evaluation import (
    ClusterLabels,
    align_labels,
    clustering_accuracy,
    contingency,
    nmi,
)
from .inference import (
    E_STEP_BLOCKS,
    doc_elbo,
    e_step_doc,
    elbo,
    elbo_breakdown,
    fit,
    infer_doc_states,
    m_step,
    update_block,
)
from .model import (
    DocVariational,
    FitReport,
    HiddenAssignments,
    HyperConfig,
    ModelParams,
    init_model,
    predict_cluster,
    random_model_params,
    sample_corpus,
    top_words,
)
from .numerics import (
    DirichletStats,
    dirichlet_mle,
    dirichlet_objective,
    digamma,
    log_gamma,
    log_normalize,
)
from .serialize import (
    load_hidden,
    load_lda,
    load_model,
    save_hidden,
    save_lda,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterLabels",
    "ConfigError",
    "E_STEP_BLOCKS",
    "Corpus",
    "CorpusFormatError",
    "DegenerateInputError",
    "DimensionError",
    "DirichletStats",
    "Document",
    "DocVariational",
    "EstimationError",
    "FitReport",
    "HiddenAssignments",
    "HyperConfig",
    "LdaModel",
    "ModelParams",
    "NumericalError",
    "Vocabulary",
    "align_labels",
    "clustering_accuracy",
    "contingency",
    "count_matrix",
    "digamma",
    "dirichlet_mle",
    "dirichlet_objective",
    "doc_elbo",
    "e_step_doc",
    "elbo",
    "elbo_breakdown",
    "fit",
    "fit_lda",
    "infer_doc_states",
    "init_model",
    "kmeans",
    "lda_kmeans",
    "lda_naive_cluster",
    "load_bow",
    "load_hidden",
    "load_labels",
    "load_lda",
    "load_model",
    "load_vocab",
    "log_gamma",
    "log_normalize",
    "m_step",
    "nmi",
    "predict_cluster",
    "random_model_params",
    "sample_corpus",
    "save_bow",
    "save_hidden",
    "save_labels",
    "save_lda",
    "save_model",
    "save_vocab",
    "tfidf_vectors",
    "top_words",
    "update_block",
    "__version__",
]

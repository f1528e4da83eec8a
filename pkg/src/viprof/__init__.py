"""viprof: age and gender profiling of social-media authors from their text,
their posted images, and the fusion of both."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    AgeRange, Corpus, Gender, ImageRecord, Profile, Source, StatsReport,
    corpus_stats, load_corpus, parse_truth_file,
)
from .errors import CapabilityUnavailable, DataError, ViprofError  # noqa: F401
from .evaluation import (  # noqa: F401
    EvaluationReport, FoldPlan, accuracy, class_probability_baseline,
    make_folds, render_report,
)
from .pipelines import (  # noqa: F401
    MethodSpec, SourceScenario, majority_vote, run_method, run_multimodal,
    run_per_image_eval, run_source_scenario, run_textual, run_thousand_words,
    run_visual_individual, run_visual_prototype,
)
from .qualitative import (  # noqa: F401
    CategoryHistogram, DifferenceList, difference_list, export_cloud,
    group_histogram, label_image,
)
from .svm import (  # noqa: F401
    BinaryModel, TrainConfig, TrainedModel, decision_value, predict,
    train_binary, train_multiclass,
)
from .textfeat import (  # noqa: F401
    SparseVector, Vocabulary, build_vocabulary, tokenize, vectorize,
)
from .visfeat import (  # noqa: F401
    EmbeddingStore, EmbeddingVector, Prototype, build_prototype,
    concat_multimodal, load_embeddings,
)

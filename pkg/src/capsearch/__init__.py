"""Text-to-image retrieval over M-LLM captions with sparse lexical search."""

from capsearch.analysis import AnalyzerConfig, DEFAULT_ANALYZER, tokenize
from capsearch.captions import (
    CaptionClient,
    CaptionDocument,
    CaptionRequest,
    CaptionSource,
    caption_dataset,
    load_captions,
    save_captions,
)
from capsearch.clipscore import (
    ClipScoreConfig,
    Embedding,
    JsonlEmbeddingStore,
    averaged_clipscore_all,
    averaged_clipscore_each,
    clip_score,
    sweep_patterns,
)
from capsearch.crops import (
    CropPattern,
    CropRect,
    GridSpec,
    PATTERN_CROPS17,
    PATTERN_CROPS40,
    PATTERN_NONE,
    crop_image,
    generate_crops,
    pattern_by_name,
)
from capsearch.datasets import Dataset, ImageRecord, load_coco, load_jsonl
from capsearch.evaluation import (
    DenseRetriever,
    EvalReport,
    FeedbackTrace,
    SparseRetriever,
    compose_query,
    dense_search,
    k_sweep,
    pr_auc,
    precision_at_k,
    recall_at_k,
    run_caption_scenario,
    run_feedback_scenario,
    run_keyword_scenario,
    run_multikeyword_scenario,
    term_histogram,
)
from capsearch.index import (
    Bm25Params,
    InvertedIndex,
    RankedResult,
    bm25_score,
    build_index,
    load_index,
    save_index,
    search,
)

__version__ = "0.1.0"

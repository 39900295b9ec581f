"""Dynamic network embeddings from temporal neighbor walks.

The pipeline trains, per graph snapshot, an LSTM autoencoder on temporal
neighbor walks (tracking how each node's neighborhood evolved over the last L
snapshots) and uses its input-layer weights to warm-start a skipgram model
trained on second-order random walks over the current snapshot. Downstream
protocols evaluate the resulting embedding stream on star-anomaly detection,
link prediction and node classification.
"""

__version__ = "0.1.0"

from .embedding import EmbeddingMatrix, read_embeddings, write_embeddings
from .evaluation import (
    ClassifierSettings,
    EvalReport,
    InjectionPlan,
    LabeledEdgeSet,
    auc,
    edge_embed,
    edge_features,
    f1_scores,
    inject_stars,
    predict_scores,
    run_anomaly_task,
    run_link_prediction,
    run_node_classification,
    sample_negative_edges,
    train_logreg,
)
from .graphs import (
    EdgeSchema,
    NodeRegistry,
    Snapshot,
    SnapshotSequence,
    TemporalEdgeSet,
    ingest_edge_list,
    read_node_labels,
    snapshot_split,
)
from .lstm import (
    LstmAutoencoder,
    LstmParams,
    forward_autoencode,
    gradient_check,
    init_autoencoder,
    input_embeddings,
    lstm_step,
    warm_start,
)
from .lstm import train as train_autoencoder
from .pipeline import (
    EmbedConfig,
    EmbeddingStream,
    embed_snapshot_static,
    embed_stream,
    embed_stream_static,
    load_stream,
    save_stream,
)
from .skipgram import SkipgramModel, embeddings, init_skipgram, train_sgns
from .walks import (
    AliasTable,
    Walk,
    WalkSet,
    alias_sample,
    alias_sample_many,
    build_alias_table,
    node2vec_walks,
    temporal_walks,
    write_walks,
)

__all__ = [name for name in dir() if not name.startswith("_")]

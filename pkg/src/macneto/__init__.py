"""Obfuscation-resilient executable search.

Fingerprints JVM executables by abstract instruction distributions, projects
them onto principal components, trains a classifier that maps an app and its
obfuscated twin to the same component vector, and retrieves un-obfuscated
neighbors of obfuscated queries by cosine similarity.
"""

from .callgraph import CallGraph, MethodRef, build_call_graph
from .errors import (
    DimensionMismatch,
    DuplicateAppId,
    DuplicateMethod,
    EmptyCorpus,
    InsufficientFold,
    MacnetoError,
    MalformedClassFile,
    ManifestError,
    NonFiniteLoss,
    UnknownMnemonic,
)
from .classfile import parse_class_file
from .evaluate import CorpusPair, EvaluationReport, kfold_evaluate, render_table, split_folds
from .features import (
    InstructionDistribution,
    app_id,
    distributions_to_csv,
    extract_app_id,
    extract_corpus_ids,
    ids_to_matrix,
    method_id,
)
from .keywords import TfidfKeywords
from .model import (
    AppModel,
    CallSite,
    ClassModel,
    CorpusManifest,
    ManifestEntry,
    MethodModel,
    load_app,
    load_corpus,
    load_manifest,
    load_textual_app,
    parse_textual_app,
    save_manifest,
    serialize_textual_app,
)
from .network import (
    AdamState,
    NetworkParams,
    PcvNetwork,
    TrainingConfig,
    adam_step,
    forward,
    gradients,
    init_network,
    loss,
    paired_training_set,
    scale_inputs,
    train,
)
from .obfuscate import (
    JunkSegment,
    ObfuscationConfig,
    ObfuscationResult,
    default_config,
    inject_string_decrypt,
    insert_junk,
    load_junk_vocabulary,
    obfuscate,
    rename_identifiers,
    replay_id_delta,
)
from .pca import InstructionPca
from .persist import TrainedModel, load_model, save_model
from .search import CosineIndex, RankedHit, RankedResult, cosine, mrr, top_at_k
from .synth import generate_app, generate_pairs, write_corpus
from .vocabulary import InstructionVocabulary, abstract_opcode, build_vocabulary, load_vocabulary

__version__ = "0.1.0"

"""Speaker-identity corpus expansion in embedding space.

Selects pairs of similar identities, interpolates new unit-norm identity
vectors along great-circle arcs, assigns transcripts, and emits synthesis
manifests plus diagnostic statistics. Everything is deterministic under a
single seed.
"""

from .core import (
    Gender,
    SpeakerEmbedding,
    SyntheticIdentity,
    cosine_distance,
    interpolate_identity,
    normalize,
    slerp,
)
from .errors import (
    AntipodalPair,
    CapacityError,
    DegenerateCovariance,
    DimensionMismatch,
    DuplicateIdentity,
    EmptyPool,
    GenderMismatch,
    GroupTooSmall,
    IdenticalParents,
    InputError,
    InvalidSpec,
    IoFailure,
    PipelineError,
    PoolTooSmall,
    TargetExceedsCapacity,
    UnknownIdentity,
    ZeroVector,
)
from .planner import (
    EmbeddingSet,
    NeighborTable,
    PairPlan,
    PlannedPair,
    build_neighbor_tables,
    execute_plan,
    pair_capacity,
    plan_pairs_nearest_neighbor,
    plan_pairs_random,
    read_pair_plan,
    split_total,
    write_pair_plan,
)
from .bank import read_bank, write_bank
from .manifest import (
    SynthesisManifest,
    TranscriptEntry,
    assign_texts,
    emit,
    ingest_transcripts,
)
from .diagnostics import (
    CoverageReport,
    ProjectionResult,
    SimilarityHistogram,
    coverage_gain,
    intra_class_scores,
    intra_class_similarity,
    project_2d,
)
from .simulate import (
    ClusterSpec,
    ExperimentReport,
    PopulationSpec,
    energy_distance,
    run_experiment,
    sample_population,
    sample_vmf,
)
from .seeds import derive_seed, gender_group_seed

__version__ = "0.1.0"

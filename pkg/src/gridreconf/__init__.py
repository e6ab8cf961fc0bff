"""Radial distribution network reconfiguration toolkit.

Models switchable distribution networks, solves them with a
backward/forward-sweep power flow, searches for loss-minimizing radial
configurations, builds instruction-tuning datasets from the results, and
parses, scores and evaluates model responses against those labels.
"""

from .dataset import (
    DatasetSample,
    LoadProfiles,
    PrecisionRules,
    PromptRecord,
    PromptTemplate,
    build_dataset,
    generate_scenarios,
    make_sample,
    reduce_precision,
    render_completion,
    render_prompt,
    round_half_away,
    unreduced_template,
)
from .errors import (
    EmptyProfile,
    EndpointError,
    GridReconfError,
    InvalidLine,
    NotRadial,
    TemplateMissingSlot,
    TooLarge,
    ZeroPredictedLines,
)
from .evaluation import (
    EndpointConfig,
    EvalReport,
    evaluate_corpus,
    evaluate_endpoint,
    report,
    write_report_files,
)
from .io import (
    builtin_network,
    load_network,
    network_from_dict,
    network_to_dict,
    read_jsonl,
    read_samples_csv,
    save_network,
    write_jsonl,
    write_samples_csv,
)
from .network import (
    Bus,
    Configuration,
    Graph,
    Line,
    Network,
    UnionFind,
    adjacency,
    canonical_pair,
    closed_graph,
    count_components,
    count_cycles,
    is_radial,
)
from .optimize import (
    OptimizationResult,
    optimize_branch_exchange,
    optimize_exhaustive,
    spanning_tree_count,
)
from .powerflow import (
    ConstraintReport,
    PowerFlowResult,
    check_constraints,
    solve,
    system_loss,
)
from .responses import (
    IMPROPER,
    PARTIAL,
    PROPER,
    ParsedResponse,
    Violation,
    clean,
    extract,
    validate,
)
from .scoring import (
    LossComponents,
    cycle_loss,
    score_sample,
    subconfig_loss,
    subgraph_loss,
    total_loss,
)
from .server import make_server, score_row

__version__ = "0.1.0"

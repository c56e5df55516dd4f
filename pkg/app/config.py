"""
Engine configuration: environment-backed settings and the closed vocabularies
shared by the engine, services and command routers
"""
import os
from pathlib import Path
from enum import Enum
from dotenv import load_dotenv

load_dotenv()


class CentralityMeasure(str, Enum):
    """Supported node centrality measures"""
    DEGREE = "degree"
    BETWEENNESS = "betweenness"
    CLOSENESS = "closeness"
    LOAD = "load"
    PAGERANK = "pagerank"


class Order(str, Enum):
    DESCENDING = "descending"
    ASCENDING = "ascending"


class ScheduleMode(str, Enum):
    """How layer batches are chosen"""
    CAMP = "camp"
    RAMP = "ramp"


class RunMode(str, Enum):
    """Experiment-level mode: centrality batches, random batches or synchronous baseline"""
    CAMP = "camp"
    RAMP = "ramp"
    SYNC = "sync"


class Arch(str, Enum):
    GCN = "gcn"
    GIN = "gin"


class AggregationScope(str, Enum):
    ALL_NEIGHBORS = "all_neighbors"
    BATCH_NEIGHBORS = "batch_neighbors"


class Normalization(str, Enum):
    SYMMETRIC_DEGREE = "symmetric_degree"
    NONE = "none"


class DiagnosticMetric(str, Enum):
    DIRICHLET = "dirichlet"
    SENSITIVITY = "sensitivity"
    PROP1 = "prop1"
    RESISTANCE = "resistance"
    SIGNAL = "signal"


class Settings:
    # ---------------------------
    # Paths
    # ---------------------------
    BASE_DIR: Path = Path(__file__).parent.parent
    DATA_DIR: Path = Path(os.getenv("CAMP_DATA_DIR", "data"))
    RESULTS_DIR: Path = Path(os.getenv("CAMP_RESULTS_DIR", "results"))

    # ---------------------------
    # Logging
    # ---------------------------
    LOG_LEVEL: str = os.getenv("CAMP_LOG_LEVEL", "INFO").upper()
    RUN_LOG_ENABLED: bool = os.getenv("CAMP_RUN_LOG_ENABLED", "True").lower() == "true"

    # ---------------------------
    # Execution
    # ---------------------------
    NUM_WORKERS: int = int(os.getenv("CAMP_NUM_WORKERS", "1"))

    # ---------------------------
    # Training defaults
    # ---------------------------
    DEFAULT_EPOCHS: int = int(os.getenv("CAMP_DEFAULT_EPOCHS", "200"))
    DEFAULT_HIDDEN_DIM: int = int(os.getenv("CAMP_DEFAULT_HIDDEN_DIM", "64"))
    DEFAULT_TRIALS: int = int(os.getenv("CAMP_DEFAULT_TRIALS", "25"))
    DEFAULT_LR: float = 0.001
    DEFAULT_DROPOUT: float = 0.5
    DEFAULT_WEIGHT_DECAY: float = 1e-5
    DEFAULT_BATCH_SIZE: int = 64
    DEFAULT_LAYERS: int = 4

    # ---------------------------
    # Centrality
    # ---------------------------
    PAGERANK_DAMPING: float = float(os.getenv("CAMP_PAGERANK_DAMPING", "0.85"))
    PAGERANK_TOL: float = float(os.getenv("CAMP_PAGERANK_TOL", "1e-8"))
    PAGERANK_MAX_ITER: int = int(os.getenv("CAMP_PAGERANK_MAX_ITER", "200"))
    # BFS sources processed together by betweenness, closeness and load
    CENTRALITY_BLOCK_SIZE: int = int(os.getenv("CAMP_CENTRALITY_BLOCK_SIZE", "256"))

    # ---------------------------
    # Diagnostics
    # ---------------------------
    SIGNAL_SOURCES: int = int(os.getenv("CAMP_SIGNAL_SOURCES", "10"))
    LIPSCHITZ_CONSTANT: float = 1.0


settings = Settings()

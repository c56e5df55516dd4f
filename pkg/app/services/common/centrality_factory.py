"""
Centrality Provider Factory - abstract factory over the five centrality measures
"""
import logging
import threading
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from app.config import CentralityMeasure
from app.engine.centrality import (
    CentralityScores,
    betweenness_centrality,
    closeness_centrality,
    degree_centrality,
    load_centrality,
    pagerank_centrality,
)
from app.engine.graph import Dataset, Graph
from app.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)


class CentralityProviderInterface(ABC):
    """Abstract interface for centrality providers"""

    measure: CentralityMeasure

    @abstractmethod
    def compute(self, g: Graph) -> CentralityScores:
        """Score every node of g"""
        pass

    def compute_or_zero(self, g: Graph) -> CentralityScores:
        """Like compute, but graphs too small for the measure get all-zero scores"""
        try:
            return self.compute(g)
        except DomainError as e:
            logger.warning(f"{self.measure.value} undefined for graph {g.graph_id} ({e}); using zero scores")
            return CentralityScores(self.measure, np.zeros(g.n), g.graph_id)


class DegreeProvider(CentralityProviderInterface):
    measure = CentralityMeasure.DEGREE

    def compute(self, g: Graph) -> CentralityScores:
        return degree_centrality(g)


class BetweennessProvider(CentralityProviderInterface):
    measure = CentralityMeasure.BETWEENNESS

    def compute(self, g: Graph) -> CentralityScores:
        return betweenness_centrality(g)


class ClosenessProvider(CentralityProviderInterface):
    measure = CentralityMeasure.CLOSENESS

    def compute(self, g: Graph) -> CentralityScores:
        return closeness_centrality(g)


class LoadProvider(CentralityProviderInterface):
    measure = CentralityMeasure.LOAD

    def compute(self, g: Graph) -> CentralityScores:
        return load_centrality(g)


class PageRankProvider(CentralityProviderInterface):
    measure = CentralityMeasure.PAGERANK

    def __init__(self, damping: Optional[float] = None, tol: Optional[float] = None, max_iter: Optional[int] = None):
        self.kwargs = {
            k: v for k, v in {"damping": damping, "tol": tol, "max_iter": max_iter}.items() if v is not None
        }

    def compute(self, g: Graph) -> CentralityScores:
        return pagerank_centrality(g, **self.kwargs)


class CentralityFactory:
    """Factory class resolving a measure name to a provider, with a per-dataset cache"""

    _providers = {
        CentralityMeasure.DEGREE: DegreeProvider,
        CentralityMeasure.BETWEENNESS: BetweennessProvider,
        CentralityMeasure.CLOSENESS: ClosenessProvider,
        CentralityMeasure.LOAD: LoadProvider,
        CentralityMeasure.PAGERANK: PageRankProvider,
    }

    def __init__(self):
        # the dataset is held alongside its scores so its id cannot be reused
        self._cache: dict[tuple[int, CentralityMeasure], tuple[Dataset, list[CentralityScores]]] = {}
        self._lock = threading.Lock()

    @classmethod
    def create_provider(cls, measure: str | CentralityMeasure, **kwargs) -> CentralityProviderInterface:
        """
        Create a provider for the given measure

        Args:
            measure: measure name or enum member
            **kwargs: provider options (PageRank damping/tol/max_iter)

        Returns:
            CentralityProviderInterface
        """
        try:
            measure_enum = CentralityMeasure(measure.lower() if isinstance(measure, str) else measure)
        except ValueError:
            raise ConfigError(
                f"Unsupported centrality measure: {measure}. "
                f"Supported measures: {[m.value for m in CentralityMeasure]}"
            )

        provider_class = cls._providers.get(measure_enum)
        if not provider_class:
            raise ConfigError(f"Measure {measure} not implemented")
        return provider_class(**kwargs)

    def compute_all(self, ds: Dataset, measure: str | CentralityMeasure) -> list[CentralityScores]:
        """Scores for every graph of ds, computed once per (dataset, measure)"""
        provider = self.create_provider(measure)
        key = (id(ds), provider.measure)
        with self._lock:
            if key not in self._cache:
                logger.info(f"Computing {provider.measure.value} centrality for {len(ds)} graphs of {ds.name}")
                self._cache[key] = (ds, [provider.compute_or_zero(g) for g in ds.graphs])
            return self._cache[key][1]

    def clear(self):
        self._cache.clear()


# Singleton instance for easy access
centrality_factory = CentralityFactory()

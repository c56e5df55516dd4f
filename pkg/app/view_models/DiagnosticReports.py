from pydantic import BaseModel, Field, field_validator


class SensitivityPair(BaseModel):
    u: int
    v: int
    distance: int
    layer: int = Field(ge=0)
    jacobian_l1: float = Field(ge=0.0)
    model_factor: float
    topology_factor: float
    bound: float


class SensitivityReport(BaseModel):
    graph_id: int
    c: float
    w: float
    width: int
    pairs: list[SensitivityPair] = Field(default_factory=list)


class DirichletReport(BaseModel):
    """Dirichlet energy after the encoder (index 0) and after each layer"""
    graph_id: int
    energies: list[float]

    @field_validator("energies")
    @classmethod
    def _non_negative(cls, energies: list[float]) -> list[float]:
        if any(e < 0 for e in energies):
            raise ValueError("Dirichlet energies are non-negative")
        return energies

    @property
    def final(self) -> float:
        return self.energies[-1]


class SignalPropEntry(BaseModel):
    """Signal reaching the rest of one graph from random single-node sources after m layers"""
    graph_id: int
    layers: int = Field(ge=0)
    num_sources: int = Field(ge=1)
    r_total_normalized: float = Field(ge=0.0)
    signal: float = Field(ge=0.0)

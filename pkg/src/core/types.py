"""
Modelo de dados compartilhado: áreas, fluxos OD, máscara de observação e visões
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidInputError


def _frozen(array, dtype=np.float64) -> np.ndarray:
    """Bloqueia escrita (objetos de valor imutáveis); copia apenas arrays graváveis"""
    out = np.asarray(array, dtype=dtype)
    if out.flags.writeable:
        out = out.copy()
        out.flags.writeable = False
    return out


class Period(str, Enum):
    """Períodos do dia considerados na previsão"""
    MORNING_RUSH = "morning"      # 07h00 - 09h00
    AFTERNOON_RUSH = "afternoon"  # 17h00 - 19h00
    NON_RUSH = "nonrush"          # 14h00 - 16h00

    @classmethod
    def parse(cls, value: Union[str, "Period"]) -> "Period":
        if isinstance(value, Period):
            return value
        for period in cls:
            if period.value == value or period.name.lower() == str(value).lower():
                return period
        raise ValueError(f"Periodo desconhecido: {value}")


@dataclass(frozen=True)
class AreaCatalog:
    """Conjunto de áreas da cidade (conhecidas = possuem estação)"""
    ids: Tuple[str, ...]
    coords: np.ndarray  # (n, 2): latitude, longitude em graus
    known: np.ndarray   # (n,) bool

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "coords", _frozen(self.coords))
        object.__setattr__(self, "known", _frozen(self.known, dtype=bool))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def known_indices(self) -> np.ndarray:
        return np.flatnonzero(self.known)

    @property
    def target_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.known)

    def with_targets(self, targets: Iterable[int]) -> "AreaCatalog":
        """Retorna uma cópia com as áreas indicadas marcadas como alvo"""
        known = np.ones(self.n, dtype=bool)
        known[list(targets)] = False
        return AreaCatalog(ids=self.ids, coords=self.coords, known=known)

    def index_of(self, area_id: str) -> int:
        return self.ids.index(str(area_id))


@dataclass(frozen=True)
class FlowTensor:
    """Pilha de D matrizes OD diárias (n x n) de um período"""
    period: Period
    matrices: np.ndarray  # (D, n, n)

    def __post_init__(self):
        matrices = np.asarray(self.matrices, dtype=np.float64)
        if matrices.ndim == 2:
            matrices = matrices[np.newaxis]
        object.__setattr__(self, "period", Period.parse(self.period))
        object.__setattr__(self, "matrices", _frozen(matrices))

    @property
    def days(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[-1]

    @property
    def last(self) -> np.ndarray:
        """Matriz do dia D"""
        return self.matrices[-1]

    def transpose(self) -> "FlowTensor":
        """Fluxos vistos do lado das chegadas (F_d transposta)"""
        return FlowTensor(self.period, self.matrices.transpose(0, 2, 1))


@dataclass(frozen=True)
class ObservationMask:
    """Indicadora Y das entradas observadas"""
    Y: np.ndarray  # (n, n) bool

    def __post_init__(self):
        object.__setattr__(self, "Y", _frozen(self.Y, dtype=bool))

    @property
    def unobserved(self) -> np.ndarray:
        return ~self.Y

    def transpose(self) -> "ObservationMask":
        return ObservationMask(self.Y.T)


@dataclass(frozen=True)
class ViewSet:
    """Visões estatísticas das áreas (linhas = áreas, colunas = atributos)"""
    views: Tuple[np.ndarray, ...] = ()
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        views = tuple(_frozen(np.atleast_2d(v)) for v in self.views)
        names = tuple(self.names) or tuple(f"view{i + 1}" for i in range(len(views)))
        if len(names) != len(views):
            raise ValueError("Numero de nomes difere do numero de visoes")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "names", names)

    @classmethod
    def empty(cls) -> "ViewSet":
        return cls()

    @property
    def count(self) -> int:
        return len(self.views)

    def concatenated(self) -> np.ndarray:
        return np.hstack(self.views)


@dataclass(frozen=True)
class Dataset:
    """Catálogo, fluxos por período e visões de uma cidade"""
    catalog: AreaCatalog
    flows: Dict[Period, FlowTensor]
    views: ViewSet = field(default_factory=ViewSet.empty)

    def period(self, period: Union[str, Period]) -> FlowTensor:
        key = Period.parse(period)
        if key not in self.flows:
            raise InvalidInputError(f"Periodo sem fluxos: {key.value}")
        return self.flows[key]


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]

    def __str__(self) -> str:
        if self.is_valid:
            return "ok"
        return "; ".join(f"[{v.kind}] {v.message}" for v in self.violations)


def validate(
    catalog: AreaCatalog,
    flows: Union[FlowTensor, Sequence[FlowTensor]],
    views: ViewSet,
    k: Optional[int] = None
) -> ValidationReport:
    """
    Verifica todos os invariantes das entradas

    Não lança exceções: retorna um relatório com cada violação encontrada.
    Relatório vazio significa entradas consistentes.

    Args:
        catalog: Catálogo de áreas
        flows: Um ou mais tensores de fluxo
        views: Visões estatísticas
        k: Tamanho da vizinhança (opcional)

    Returns:
        ValidationReport com as violações
    """
    found: List[Violation] = []
    n = catalog.n

    if n < 2:
        found.append(Violation("catalog", f"sao necessarias ao menos 2 areas (n={n})"))
    if len(set(catalog.ids)) != n:
        found.append(Violation("catalog", "identificadores de area repetidos"))
    if not catalog.known.any():
        found.append(Violation("catalog", "nenhuma area conhecida"))
    if catalog.coords.shape != (n, 2):
        found.append(Violation("dimension", f"coords com forma {catalog.coords.shape}, esperado ({n}, 2)"))
    elif not np.isfinite(catalog.coords).all():
        found.append(Violation("nan", "coordenadas nao finitas"))
    if catalog.known.shape != (n,):
        found.append(Violation("dimension", "vetor known com tamanho incorreto"))

    tensors = [flows] if isinstance(flows, FlowTensor) else list(flows)
    for tensor in tensors:
        label = tensor.period.value
        m = tensor.matrices
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            found.append(Violation("dimension", f"fluxos {label}: matrizes nao quadradas {m.shape}"))
            continue
        if m.shape[1] != n:
            found.append(Violation("dimension", f"fluxos {label}: n={m.shape[1]}, catalogo n={n}"))
        finite = np.isfinite(m)
        if not finite.all():
            found.append(Violation("nan", f"fluxos {label}: {int((~finite).sum())} entradas nao finitas"))
        negatives = int((m[finite] < 0).sum())
        if negatives:
            found.append(Violation("negative-flow", f"fluxos {label}: {negatives} entradas negativas"))

    for name, X in zip(views.names, views.views):
        if X.shape[0] != n:
            found.append(Violation("dimension", f"visao {name}: {X.shape[0]} linhas, esperado {n}"))
        if not np.isfinite(X).all():
            found.append(Violation("nan", f"visao {name}: valores nao finitos"))

    if k is not None:
        n_known = int(catalog.known.sum())
        if k < 1:
            found.append(Violation("k", f"k deve ser positivo (k={k})"))
        elif k >= n_known:
            found.append(Violation("k", f"k={k} >= numero de areas conhecidas ({n_known})"))

    return ValidationReport(tuple(found))


def build_mask(catalog: AreaCatalog) -> ObservationMask:
    """Y(i, j) = known(i) AND known(j)"""
    known = catalog.known
    return ObservationMask(np.outer(known, known))

"""
Simulação de áreas alvo: os fluxos de cada alvo passam para a área conhecida mais próxima
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from src.core.types import AreaCatalog, FlowTensor
from src.errors import InvalidInputError


@dataclass(frozen=True)
class ReassignmentPlan:
    """Para onde foi cada área alvo"""
    targets: Tuple[int, ...]
    closest: Dict[int, int]            # alvo -> área conhecida mais próxima
    provenance: Dict[int, Tuple[int, ...]]  # área receptora -> alvos absorvidos

    def to_dict(self, ids) -> dict:
        return {
            "targets": [ids[t] for t in self.targets],
            "closest": {ids[t]: ids[c] for t, c in sorted(self.closest.items())},
            "provenance": {
                ids[c]: [ids[t] for t in merged]
                for c, merged in sorted(self.provenance.items())
            },
        }


def closest_known(catalog: AreaCatalog, geo: np.ndarray) -> Dict[int, int]:
    """Área conhecida geograficamente mais próxima de cada alvo (empate: menor índice)"""
    known_idx = catalog.known_indices
    if len(known_idx) == 0:
        raise InvalidInputError("nenhuma area conhecida para receber os alvos")
    mapping = {}
    for t in catalog.target_indices:
        # argmin devolve a primeira ocorrência, e known_idx é crescente
        mapping[int(t)] = int(known_idx[np.argmin(geo[t, known_idx])])
    return mapping


def reassign(
    flows: FlowTensor,
    catalog: AreaCatalog,
    geo: np.ndarray
) -> Tuple[FlowTensor, ReassignmentPlan]:
    """
    Constrói os fluxos de treino simulando a ausência de estação nos alvos

    As partidas de cada alvo (linha) somam-se à linha da área conhecida mais
    próxima e a linha do alvo é zerada; as chegadas (coluna) recebem o mesmo
    tratamento em seguida. A massa total de cada dia é conservada.

    Args:
        flows: Fluxos completos (verdade de campo) de todas as áreas
        catalog: Catálogo com as áreas alvo marcadas como não conhecidas
        geo: Distâncias geográficas n x n

    Returns:
        (fluxos reatribuídos, plano de reatribuição)
    """
    mapping = closest_known(catalog, geo)
    provenance: Dict[int, list] = {}
    for t, c in mapping.items():
        provenance.setdefault(c, []).append(t)

    out = np.array(flows.matrices, copy=True)
    for t, c in mapping.items():
        out[:, c, :] += out[:, t, :]
        out[:, t, :] = 0.0
    for t, c in mapping.items():
        out[:, :, c] += out[:, :, t]
        out[:, :, t] = 0.0

    plan = ReassignmentPlan(
        targets=tuple(sorted(mapping)),
        closest=mapping,
        provenance={c: tuple(ts) for c, ts in provenance.items()},
    )
    return FlowTensor(flows.period, out), plan

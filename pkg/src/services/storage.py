"""
Serviço de armazenamento: CSV de áreas/fluxos/visões, checkpoints do modelo e manifestos
"""
import hashlib
import json
import logging
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src import __version__
from src.core.types import AreaCatalog, Dataset, FlowTensor, Period, ViewSet
from src.errors import StorageError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
CHECKPOINT_MAGIC = b"PPFCKPT1"
CHECKPOINT_VERSION = 1
FLOW_FILE = re.compile(r"^flows_(?P<period>[a-z]+)_(?P<day>\d+)\.csv$")
VIEW_FILE = re.compile(r"^view_(?P<name>.+)\.csv$")


class RunManifest(BaseModel):
    """Registro de uma execução da linha de comando"""
    subcommand: str
    config: dict
    input_digests: Dict[str, str]
    seed: int
    outputs: List[str]
    version: str = __version__


@dataclass(frozen=True)
class Checkpoint:
    C: np.ndarray
    W: np.ndarray
    H: np.ndarray
    header: dict


class StorageService:
    """Leitura e escrita de todos os artefatos em disco"""

    # --- Diretórios e arquivos genéricos ---

    def prepare_output_dir(self, path) -> Path:
        """Cria o diretório de saída; falha se já existir com conteúdo"""
        out = Path(path)
        if out.exists() and any(out.iterdir()):
            raise StorageError(f"Diretorio de saida nao esta vazio: {out}")
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"Erro ao criar diretorio {out}: {e}") from e
        return out

    def digest(self, path) -> str:
        """SHA-256 do conteúdo do arquivo"""
        h = hashlib.sha256()
        try:
            with open(path, "rb") as f:
                for chunk in iter(lambda: f.read(1 << 20), b""):
                    h.update(chunk)
        except OSError as e:
            raise StorageError(f"Erro ao ler {path}: {e}") from e
        return h.hexdigest()

    def digests(self, paths: Iterable) -> Dict[str, str]:
        return {Path(p).name: self.digest(p) for p in sorted(paths, key=lambda p: Path(p).name)}

    def write_json(self, path, payload) -> Path:
        path = Path(path)
        try:
            path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Erro ao escrever {path}: {e}") from e
        return path

    def read_json(self, path) -> dict:
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise StorageError(f"Erro ao ler {path}: {e}") from e

    def write_manifest(self, out_dir, manifest: RunManifest) -> Path:
        return self.write_json(Path(out_dir) / "manifest.json", manifest.model_dump())

    def _to_csv(self, frame: pd.DataFrame, path, index: bool = True) -> Path:
        try:
            frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise StorageError(f"Erro ao escrever {path}: {e}") from e
        return Path(path)

    def _read_csv(self, path, **kwargs) -> pd.DataFrame:
        try:
            return pd.read_csv(path, **kwargs)
        except (OSError, ValueError, pd.errors.ParserError) as e:
            raise StorageError(f"Erro ao ler {path}: {e}") from e

    # --- Áreas ---

    def write_areas(self, path, catalog: AreaCatalog) -> Path:
        frame = pd.DataFrame({
            "id": list(catalog.ids),
            "lat": catalog.coords[:, 0],
            "lon": catalog.coords[:, 1],
            "known": catalog.known.astype(int),
        })
        return self._to_csv(frame, path, index=False)

    def read_areas(self, path) -> AreaCatalog:
        frame = self._read_csv(path, dtype={"id": str})
        missing = {"id", "lat", "lon", "known"} - set(frame.columns)
        if missing:
            raise StorageError(f"{path}: colunas ausentes {sorted(missing)}")
        return AreaCatalog(
            ids=frame["id"].tolist(),
            coords=frame[["lat", "lon"]].to_numpy(dtype=np.float64),
            known=frame["known"].to_numpy().astype(int) == 1,
        )

    # --- Matrizes OD ---

    def write_matrix(self, path, matrix: np.ndarray, ids: Sequence[str]) -> Path:
        frame = pd.DataFrame(np.asarray(matrix), index=list(ids), columns=list(ids))
        frame.index.name = "origin"
        return self._to_csv(frame, path)

    def read_matrix(self, path, ids: Optional[Sequence[str]] = None) -> Tuple[np.ndarray, List[str]]:
        """Lê uma matriz n x n; com ids, reordena linhas e colunas nessa ordem"""
        frame = self._read_csv(path, index_col=0)
        frame.index = frame.index.astype(str)
        frame.columns = frame.columns.astype(str)
        if ids is not None:
            ids = [str(i) for i in ids]
            if set(frame.index) != set(ids) or set(frame.columns) != set(ids):
                raise StorageError(f"{path}: areas nao correspondem ao catalogo")
            frame = frame.loc[ids, ids]
        return frame.to_numpy(dtype=np.float64), list(frame.index)

    def flow_filename(self, period: Period, day: int) -> str:
        return f"flows_{period.value}_{day:02d}.csv"

    # --- Visões ---

    def write_view(self, path, X: np.ndarray, ids: Sequence[str]) -> Path:
        frame = pd.DataFrame(np.asarray(X), index=list(ids),
                             columns=[f"f{j + 1}" for j in range(X.shape[1])])
        frame.index.name = "id"
        return self._to_csv(frame, path)

    def read_view(self, path, ids: Sequence[str]) -> np.ndarray:
        frame = self._read_csv(path, index_col=0)
        frame.index = frame.index.astype(str)
        missing = set(ids) - set(frame.index)
        if missing:
            raise StorageError(f"{path}: areas sem atributos {sorted(missing)[:5]}")
        return frame.loc[list(ids)].to_numpy(dtype=np.float64)

    # --- Dataset completo ---

    def write_dataset(self, directory, dataset: Dataset) -> List[Path]:
        """Escreve areas.csv, flows_<periodo>_<dia>.csv e view_<nome>.csv"""
        directory = Path(directory)
        ids = dataset.catalog.ids
        written = [self.write_areas(directory / "areas.csv", dataset.catalog)]
        for period, tensor in dataset.flows.items():
            for d in range(tensor.days):
                written.append(self.write_matrix(directory / self.flow_filename(period, d + 1), tensor.matrices[d], ids))
        for name, X in zip(dataset.views.names, dataset.views.views):
            written.append(self.write_view(directory / f"view_{name}.csv", X, ids))
        return written

    def dataset_files(self, directory) -> List[Path]:
        directory = Path(directory)
        return sorted(
            p for p in directory.iterdir()
            if p.name == "areas.csv" or FLOW_FILE.match(p.name) or VIEW_FILE.match(p.name)
        )

    def read_dataset(self, directory, periods: Optional[Sequence[Period]] = None) -> Dataset:
        """Lê um diretório no formato de write_dataset"""
        directory = Path(directory)
        if not (directory / "areas.csv").exists():
            raise StorageError(f"areas.csv nao encontrado em {directory}")
        catalog = self.read_areas(directory / "areas.csv")
        wanted = {Period.parse(p) for p in periods} if periods else None

        by_period: Dict[Period, List[Tuple[int, np.ndarray]]] = {}
        view_files = []
        for path in sorted(directory.iterdir()):
            match = FLOW_FILE.match(path.name)
            if match:
                try:
                    period = Period.parse(match["period"])
                except ValueError as e:
                    raise StorageError(f"{path.name}: {e}") from e
                if wanted is None or period in wanted:
                    matrix, _ = self.read_matrix(path, catalog.ids)
                    by_period.setdefault(period, []).append((int(match["day"]), matrix))
                continue
            match = VIEW_FILE.match(path.name)
            if match:
                view_files.append((match["name"], path))

        if not by_period:
            raise StorageError(f"nenhum arquivo de fluxo encontrado em {directory}")
        flows = {
            period: FlowTensor(period, np.stack([m for _, m in sorted(days, key=lambda x: x[0])]))
            for period, days in sorted(by_period.items(), key=lambda item: list(Period).index(item[0]))
        }
        views = ViewSet(
            views=tuple(self.read_view(path, catalog.ids) for _, path in view_files),
            names=tuple(name for name, _ in view_files),
        )
        logger.info(f"Dados carregados: n={catalog.n}, periodos={[p.value for p in flows]}, visoes={views.count}")
        return Dataset(catalog=catalog, flows=flows, views=views)

    # --- Checkpoint ---

    def save_checkpoint(
        self,
        path,
        C: np.ndarray,
        W: np.ndarray,
        H: np.ndarray,
        header: dict
    ) -> Path:
        """
        Grava C, W e H em float64 little-endian precedidos de um cabeçalho JSON

        Layout: magic (8 bytes) | tamanho do cabeçalho (uint64 LE) | JSON UTF-8 | arrays
        """
        arrays = []
        offset = 0
        blobs = []
        for name, array in (("C", C), ("W", W), ("H", H)):
            data = np.ascontiguousarray(array, dtype="<f8").tobytes()
            arrays.append({"name": name, "shape": list(np.shape(array)), "offset": offset})
            blobs.append(data)
            offset += len(data)

        meta = dict(header)
        meta["format_version"] = CHECKPOINT_VERSION
        meta["arrays"] = arrays
        encoded = json.dumps(meta, sort_keys=True).encode("utf-8")
        try:
            with open(path, "wb") as f:
                f.write(CHECKPOINT_MAGIC)
                f.write(struct.pack("<Q", len(encoded)))
                f.write(encoded)
                for blob in blobs:
                    f.write(blob)
        except OSError as e:
            raise StorageError(f"Erro ao gravar checkpoint {path}: {e}") from e
        return Path(path)

    def load_checkpoint(self, path) -> Checkpoint:
        try:
            raw = Path(path).read_bytes()
        except OSError as e:
            raise StorageError(f"Erro ao ler checkpoint {path}: {e}") from e
        if raw[:8] != CHECKPOINT_MAGIC:
            raise StorageError(f"{path}: nao e um checkpoint valido")
        (length,) = struct.unpack("<Q", raw[8:16])
        try:
            header = json.loads(raw[16:16 + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise StorageError(f"{path}: cabecalho corrompido: {e}") from e
        body = raw[16 + length:]

        arrays = {}
        for spec in header.get("arrays", []):
            count = int(np.prod(spec["shape"]))
            start = spec["offset"]
            chunk = body[start:start + 8 * count]
            if len(chunk) != 8 * count:
                raise StorageError(f"{path}: array {spec['name']} truncado")
            arrays[spec["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(spec["shape"]).astype(np.float64)
        if set(arrays) != {"C", "W", "H"}:
            raise StorageError(f"{path}: arrays ausentes")
        return Checkpoint(C=arrays["C"], W=arrays["W"], H=arrays["H"], header=header)

    # --- Resultados ---

    def write_results(self, path, results) -> Path:
        """CSV method,period,ratio,seed,mae,nrmse (uma linha por repetição)"""
        rows = [row for res in results for row in res.rows()]
        frame = pd.DataFrame(rows, columns=["method", "period", "ratio", "seed", "mae", "nrmse"])
        return self._to_csv(frame, path, index=False)

    def write_sweep(self, path, cells) -> Path:
        """CSV k,lambda,mae,nrmse"""
        frame = pd.DataFrame(
            [{"k": c.k, "lambda": c.lam, "mae": c.result.mae, "nrmse": c.result.nrmse} for c in cells],
            columns=["k", "lambda", "mae", "nrmse"],
        )
        return self._to_csv(frame, path, index=False)


# Instância global do serviço
storage_service = StorageService()


def get_storage_service() -> StorageService:
    return storage_service

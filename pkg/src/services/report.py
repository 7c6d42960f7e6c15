"""
Serviço de relatório: resumo legível de uma avaliação renderizado com Jinja2
"""
import logging
from pathlib import Path
from typing import Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateError

from src.errors import StorageError

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parents[2] / "templates"
REPORT_TEMPLATE = "relatorio.md.j2"


class ReportService:
    """Renderiza relatorio.md a partir do resumo de summarize()"""

    def __init__(self, templates_dir: Path = TEMPLATES_DIR):
        self.env = Environment(
            loader=FileSystemLoader(str(templates_dir)),
            undefined=StrictUndefined,
            trim_blocks=True,
            keep_trailing_newline=True,
        )

    def render(
        self,
        summary: dict,
        config: dict,
        seed: int,
        n_areas: int,
        repetitions: int,
        include_target_block: bool = True,
        subcommand: str = "eval"
    ) -> str:
        """
        Monta o texto do relatório

        Args:
            summary: Saída de summarize() ({metodo: {periodo: {razao: {mae, nrmse}}}})
            config: Configuração resolvida da execução
            seed: Semente base
            n_areas: Número de áreas do dataset
            repetitions: Repetições por razão
            include_target_block: Se o bloco alvo x alvo foi avaliado

        Returns:
            Markdown do relatório
        """
        methods = list(summary)
        periods = list(summary[methods[0]]) if methods else []
        ratios = sorted({r for m in methods for p in summary[m].values() for r in p}, key=float)

        best = {}
        for ratio in ratios:
            scored = [(summary[m]["average"][ratio]["mae"], m) for m in methods if ratio in summary[m]["average"]]
            best[ratio] = min(scored)[1] if scored else None

        try:
            template = self.env.get_template(REPORT_TEMPLATE)
            return template.render(
                subcommand=subcommand,
                summary=summary,
                config=config,
                seed=seed,
                n_areas=n_areas,
                repetitions=repetitions,
                include_target_block=include_target_block,
                methods=methods,
                periods=periods,
                ratios=ratios,
                best=best,
            )
        except TemplateError as e:
            raise StorageError(f"Erro ao renderizar relatorio: {e}") from e

    def write(self, path, text: str) -> Path:
        path = Path(path)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise StorageError(f"Erro ao escrever {path}: {e}") from e
        logger.info(f"Relatorio salvo em {path}")
        return path


# Instância global do serviço
_report_service: Optional[ReportService] = None


def get_report_service() -> ReportService:
    global _report_service
    if _report_service is None:
        _report_service = ReportService()
    return _report_service

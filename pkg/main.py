"""
Linha de comando principal - PPF
Previsão de fluxo potencial de passageiros para áreas sem estação

Subcomandos: gen, simulate-targets, fit, predict, eval, sweep, gradcheck
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from src import __version__
from src.config import Config, resolve_settings, solver_config_from
from src.core.neighborhood import build_similarity, geo_distances
from src.core.targetsim import reassign
from src.core.types import Dataset, Period, ViewSet, build_mask, validate
from src.errors import GradientCheckError, InvalidInputError, PPFError
from src.services.baselines import ls_knn_predict, nmf_predict
from src.services.datagen import SyntheticSpec, generate
from src.services.evaluation import METHODS, get_experiment_service, sample_targets, summarize
from src.services.report import get_report_service
from src.services.storage import RunManifest, get_storage_service
from src.solver.gradcheck import run_gradcheck
from src.solver.mlc import ModelState, predict_day
from src.solver.predictor import MLCPredictor

logger = logging.getLogger("ppf")

GRADCHECK_TOLERANCE = 1e-6
DEPARTURES_FILE = "departures.ppfckpt"
ARRIVALS_FILE = "arrivals.ppfckpt"


# --- Tipos de argumento ---

def _csv_list(value: str) -> List[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise argparse.ArgumentTypeError("lista vazia")
    return items


def _float_list(value: str) -> List[float]:
    try:
        return [float(v) for v in _csv_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"lista de numeros invalida: {value}") from e


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in _csv_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"lista de inteiros invalida: {value}") from e


def _methods(value: str) -> List[str]:
    methods = _csv_list(value)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise argparse.ArgumentTypeError(f"metodos desconhecidos: {unknown} (use {','.join(METHODS)})")
    return methods


def _periods(value: str) -> List[Period]:
    try:
        return [Period.parse(p) for p in _csv_list(value)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _period(value: str) -> Period:
    try:
        return Period.parse(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


# --- Auxiliares ---

def _settings(args) -> dict:
    """Configuração resolvida: ambiente < arquivo --config < flags"""
    overrides = {
        name: getattr(args, name, None)
        for name in ("seed", "n_jobs", "k", "lam", "alpha", "max_iter", "epsilon", "grad_tol",
                     "lsknn_k", "nmf_rank", "nmf_iters", "repetitions", "ratio")
    }
    return resolve_settings(args.config, overrides)


def _load_dataset(args, settings: dict, periods: Optional[Sequence[Period]] = None):
    """Lê --data ou gera a cidade sintética padrão; retorna (dataset, digests)"""
    storage = get_storage_service()
    if getattr(args, "data", None):
        dataset = storage.read_dataset(args.data, periods)
        digests = storage.digests(storage.dataset_files(args.data))
    else:
        spec = SyntheticSpec(n=args.n, days=args.days, seed=settings["seed"])
        dataset = generate(spec).as_dataset()
        if periods:
            dataset = Dataset(dataset.catalog, {p: dataset.flows[p] for p in periods}, dataset.views)
        digests = {}
    return dataset, digests


def _check(dataset: Dataset, k: Optional[int] = None):
    report = validate(dataset.catalog, list(dataset.flows.values()), dataset.views, k)
    if not report.is_valid:
        raise InvalidInputError(f"entradas invalidas: {report}")


def _period_of(dataset: Dataset, period: Optional[Period]):
    return dataset.period(period or next(iter(dataset.flows)))


def _finish(
    out: Path,
    subcommand: str,
    settings: dict,
    digests: Dict[str, str],
    outputs: Sequence[Path]
) -> int:
    storage = get_storage_service()
    manifest = RunManifest(
        subcommand=subcommand,
        config=settings,
        input_digests=digests,
        seed=settings["seed"],
        outputs=sorted([Path(p).name for p in outputs] + ["manifest.json"]),
        version=__version__,
    )
    storage.write_manifest(out, manifest)
    logger.info(f"{subcommand}: {len(outputs)} arquivos gravados em {out}")
    return 0


# --- Subcomandos ---

def cmd_gen(args) -> int:
    """Gera uma cidade sintética nos formatos CSV de entrada"""
    settings = _settings(args)
    spec = SyntheticSpec(
        n=args.n,
        regions=args.regions,
        days=args.days,
        noise=args.noise,
        view_noise=args.view_noise,
        gamma=args.gamma,
        periods=tuple(args.periods or Period),
        seed=settings["seed"],
    )
    out = get_storage_service().prepare_output_dir(args.out)
    city = generate(spec)
    outputs = get_storage_service().write_dataset(out, city.as_dataset())
    settings["synthetic"] = spec.model_dump(mode="json")
    return _finish(out, "gen", settings, {}, outputs)


def cmd_simulate_targets(args) -> int:
    """Marca áreas alvo e reatribui seus fluxos à área conhecida mais próxima"""
    settings = _settings(args)
    storage = get_storage_service()
    dataset, digests = _load_dataset(args, settings)
    _check(dataset)

    catalog = dataset.catalog
    if args.targets:
        unknown = [t for t in args.targets if t not in catalog.ids]
        if unknown:
            raise InvalidInputError(f"areas alvo inexistentes: {unknown}")
        targets = [catalog.index_of(t) for t in args.targets]
    else:
        targets = sample_targets(catalog.n, settings["ratio"], settings["seed"]).tolist()
    catalog = catalog.with_targets(targets)

    geo = geo_distances(catalog)
    flows = {}
    plan = None
    for period, tensor in dataset.flows.items():
        flows[period], plan = reassign(tensor, catalog, geo)

    out = storage.prepare_output_dir(args.out)
    outputs = storage.write_dataset(out, Dataset(catalog, flows, dataset.views))
    outputs.append(storage.write_json(out / "plan.json", plan.to_dict(catalog.ids)))
    return _finish(out, "simulate-targets", settings, digests, outputs)


def cmd_fit(args) -> int:
    """Ajusta os lados de partida e chegada de um período e grava os checkpoints"""
    settings = _settings(args)
    storage = get_storage_service()
    dataset, digests = _load_dataset(args, settings)
    cfg = solver_config_from(settings)
    _check(dataset, cfg.k)
    flows = _period_of(dataset, args.period)
    views = ViewSet.empty() if args.no_views else dataset.views

    out = storage.prepare_output_dir(args.out)
    predictor = MLCPredictor(cfg, use_views=not args.no_views).fit(flows, dataset.catalog, views)

    outputs = []
    for direction, state, report, filename in (
        ("departures", predictor.departures, predictor.departures_report, DEPARTURES_FILE),
        ("arrivals", predictor.arrivals, predictor.arrivals_report, ARRIVALS_FILE),
    ):
        header = {
            "direction": direction,
            "period": flows.period.value,
            "area_ids": list(dataset.catalog.ids),
            "config": predictor.cfg.model_dump(),
            "loss_history": list(report.losses),
            "stop_reason": report.stop_reason,
        }
        outputs.append(storage.save_checkpoint(out / filename, state.C, state.W, predictor.nbr.H, header))

    outputs.append(storage.write_json(out / "fit_report.json", {
        "period": flows.period.value,
        "departures": predictor.departures_report.to_dict(),
        "arrivals": predictor.arrivals_report.to_dict(),
    }))
    return _finish(out, "fit", settings, digests, outputs)


def cmd_predict(args) -> int:
    """Matriz completa de um dia: observados + previsões para linhas e colunas alvo"""
    settings = _settings(args)
    storage = get_storage_service()
    dataset, digests = _load_dataset(args, settings)
    _check(dataset)
    catalog = dataset.catalog
    mask = build_mask(catalog)
    Y = np.asarray(mask.Y)

    if args.baseline is None and args.model is None:
        raise InvalidInputError("informe --model (diretorio do fit) ou --baseline")

    period = args.period
    if args.model is not None:
        departures = storage.load_checkpoint(Path(args.model) / DEPARTURES_FILE)
        arrivals = storage.load_checkpoint(Path(args.model) / ARRIVALS_FILE)
        if departures.header.get("area_ids") != list(catalog.ids):
            raise InvalidInputError("areas do checkpoint diferem do catalogo informado")
        period = period or Period.parse(departures.header.get("period", Period.MORNING_RUSH.value))
        digests.update(storage.digests([Path(args.model) / DEPARTURES_FILE, Path(args.model) / ARRIVALS_FILE]))

    flows = _period_of(dataset, period)
    day = flows.days if args.day is None else args.day
    if not 1 <= day <= flows.days:
        raise InvalidInputError(f"dia {day} fora do intervalo 1..{flows.days}")
    observed = np.where(Y, flows.matrices[day - 1], 0.0)

    if args.baseline == "lsknn":
        sim = build_similarity(catalog, dataset.views)
        pred = ls_knn_predict(observed, sim, mask, settings["lsknn_k"]).matrix
        matrix = np.where(Y, observed, pred)
    elif args.baseline == "nmf":
        pred = nmf_predict(observed, dataset.views, mask, settings["nmf_rank"], settings["nmf_iters"], settings["seed"]).matrix
        matrix = np.where(Y, observed, pred)
    else:
        dep_state = ModelState(C=departures.C, W=departures.W, F_work=observed[np.newaxis])
        arr_state = ModelState(C=arrivals.C, W=arrivals.W, F_work=observed.T[np.newaxis])
        matrix = predict_day(dep_state, arr_state, departures.H, Y, observed)

    out = storage.prepare_output_dir(args.out)
    outputs = [storage.write_matrix(out / "predictions.csv", matrix, catalog.ids)]
    settings["predict"] = {"period": flows.period.value, "day": day, "baseline": args.baseline}
    return _finish(out, "predict", settings, digests, outputs)


def cmd_eval(args) -> int:
    """Compara os métodos por período e razão de alvos (protocolo de mascaramento)"""
    settings = _settings(args)
    storage = get_storage_service()
    dataset, digests = _load_dataset(args, settings, args.periods)
    cfg = solver_config_from(settings)
    _check(dataset, cfg.k)

    ratios = args.ratios or [settings["ratio"]]
    out = storage.prepare_output_dir(args.out)
    service = get_experiment_service(settings, settings["n_jobs"])
    results = service.run_experiment(
        dataset,
        args.methods,
        ratios,
        settings["repetitions"],
        cfg,
        periods=args.periods,
        include_target_block=not args.exclude_target_block,
    )
    summary = summarize(results)

    report = get_report_service()
    text = report.render(
        summary,
        settings,
        seed=settings["seed"],
        n_areas=dataset.catalog.n,
        repetitions=settings["repetitions"],
        include_target_block=not args.exclude_target_block,
    )
    outputs = [
        storage.write_results(out / "results.csv", results),
        storage.write_json(out / "summary.json", summary),
        report.write(out / "relatorio.md", text),
    ]
    settings["eval"] = {
        "methods": list(args.methods),
        "ratios": list(ratios),
        "periods": [p.value for p in (args.periods or dataset.flows)],
        "include_target_block": not args.exclude_target_block,
    }
    return _finish(out, "eval", settings, digests, outputs)


def cmd_sweep(args) -> int:
    """Sensibilidade do MLC-PPF a k e lambda"""
    settings = _settings(args)
    storage = get_storage_service()
    dataset, digests = _load_dataset(args, settings)
    cfg = solver_config_from(settings)
    _check(dataset, max(args.k_grid))

    out = storage.prepare_output_dir(args.out)
    cells = get_experiment_service(settings, settings["n_jobs"]).sweep_parameters(
        dataset,
        args.k_grid,
        args.lambda_grid,
        cfg,
        ratio=settings["ratio"],
        repetitions=settings["repetitions"],
        period=args.period,
    )
    outputs = [storage.write_sweep(out / "sweep.csv", cells)]
    settings["sweep"] = {"k_grid": list(args.k_grid), "lambda_grid": list(args.lambda_grid)}
    return _finish(out, "sweep", settings, digests, outputs)


def cmd_gradcheck(args) -> int:
    """Compara os gradientes analíticos com diferenças finitas centradas"""
    settings = _settings(args)
    storage = get_storage_service()
    out = storage.prepare_output_dir(args.out)

    result = run_gradcheck(
        n=args.n,
        days=args.days,
        n_views=args.views,
        seed=settings["seed"],
        trials=args.trials,
    )
    worst = result["max_relative_error"]
    result["tolerance"] = args.tol
    outputs = [storage.write_json(out / "gradcheck.json", result)]
    _finish(out, "gradcheck", settings, {}, outputs)

    print(f"{worst:.3e}")
    if not worst < args.tol:
        raise GradientCheckError(f"erro relativo maximo {worst:.3e} >= {args.tol:.1e}")
    return 0


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Semente de toda a aleatoriedade")
    common.add_argument("--config", default=None, help="Arquivo chave=valor (formato .env)")
    common.add_argument("--out", default=Config.OUT_DIR, help="Diretorio de saida (novo ou vazio)")
    common.add_argument("--log-level", default=Config.LOG_LEVEL)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--k", type=int, default=None)
    solver.add_argument("--lambda", dest="lam", type=float, default=None)
    solver.add_argument("--alpha", type=float, default=None)
    solver.add_argument("--max-iter", type=int, default=None)
    solver.add_argument("--epsilon", type=float, default=None)
    solver.add_argument("--grad-tol", type=float, default=None)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", default=None, help="Diretorio com areas.csv e flows_*.csv (padrao: cidade sintetica)")
    data.add_argument("--n", type=int, default=117, help="Areas da cidade sintetica quando --data e omitido")
    data.add_argument("--days", type=int, default=14)

    baselines = argparse.ArgumentParser(add_help=False)
    baselines.add_argument("--lsknn-k", type=int, default=None)
    baselines.add_argument("--nmf-rank", type=int, default=None)
    baselines.add_argument("--nmf-iters", type=int, default=None)

    parser = argparse.ArgumentParser(prog="ppf", description="Previsao de fluxo potencial de passageiros")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="Gera cidade sintetica")
    p.add_argument("--n", type=int, default=117)
    p.add_argument("--regions", type=int, default=3)
    p.add_argument("--days", type=int, default=14)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--view-noise", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--periods", type=_periods, default=None)
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("simulate-targets", parents=[common, data], help="Reatribui fluxos das areas alvo")
    p.add_argument("--targets", type=_csv_list, default=None, help="Ids das areas alvo separados por virgula")
    p.add_argument("--ratio", type=float, default=None, help="Razao de alvos sorteados quando --targets e omitido")
    p.set_defaults(handler=cmd_simulate_targets)

    p = sub.add_parser("fit", parents=[common, data, solver], help="Ajusta o modelo de um periodo")
    p.add_argument("--period", type=_period, default=None)
    p.add_argument("--no-views", action="store_true", help="Desliga o termo de guia multi-visao")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("predict", parents=[common, data, baselines], help="Preve a matriz completa de um dia")
    p.add_argument("--model", default=None, help="Diretorio de saida do fit")
    p.add_argument("--baseline", choices=["lsknn", "nmf"], default=None)
    p.add_argument("--period", type=_period, default=None)
    p.add_argument("--day", type=int, default=None, help="Dia (1..D); padrao: ultimo")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("eval", parents=[common, data, solver, baselines], help="Compara metodos")
    p.add_argument("--methods", type=_methods, default=list(METHODS))
    p.add_argument("--ratios", "--ratio", dest="ratios", type=_float_list, default=None)
    p.add_argument("--reps", dest="repetitions", type=int, default=None)
    p.add_argument("--periods", type=_periods, default=None)
    p.add_argument("--exclude-target-block", action="store_true")
    p.add_argument("--n-jobs", type=int, default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", parents=[common, data, solver], help="Grade de k e lambda")
    p.add_argument("--k-grid", type=_int_list, default=list(range(1, 11)))
    p.add_argument("--lambda-grid", type=_float_list, default=[10.0 ** e for e in range(-5, 6)])
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--reps", dest="repetitions", type=int, default=None)
    p.add_argument("--period", type=_period, default=None)
    p.add_argument("--n-jobs", type=int, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("gradcheck", parents=[common], help="Verifica os gradientes por diferencas finitas")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--days", type=int, default=2)
    p.add_argument("--views", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--tol", type=float, default=GRADCHECK_TOLERANCE)
    p.set_defaults(handler=cmd_gradcheck)

    return parser


def _report_error(kind: str, message: str):
    print(json.dumps({"error": kind, "message": message}, ensure_ascii=False), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        return args.handler(args)
    except PPFError as e:
        logger.error(f"Erro ao executar {args.command}: {e}")
        _report_error(e.kind, str(e))
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Erro de configuracao: {e}")
        _report_error(InvalidInputError.kind, str(e))
        return InvalidInputError.exit_code
    except Exception as e:
        logger.exception(f"Erro inesperado em {args.command}")
        _report_error("erro", str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())

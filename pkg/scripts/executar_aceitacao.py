#!/usr/bin/env python3
"""
Script de aceitação: execuções longas sobre dados sintéticos
Execute: python scripts/executar_aceitacao.py [--reps 20] [--n-jobs 4]

Verifica a descida da perda e a recuperação na instância plantada, a ordem
MLC-PPF < LS-KNN < NMF na cidade padrão, a tendência com a razão de alvos e
a estabilidade em lambda. Sai com código 1 se alguma verificação falhar.
"""
import argparse
import logging
import sys
import time

sys.path.insert(0, '.')

import numpy as np

from src.config import SolverConfig
from src.core.types import Period, build_mask
from src.services.datagen import SyntheticSpec, generate, planted_instance
from src.services.evaluation import ExperimentService
from src.solver.mlc import fit, predict


def verificar_descida_plantada():
    """Perda não crescente e final < 1e-4 da inicial em até 2000 iterações"""
    inst = planted_instance(n=10, k=2, seed=42)
    cfg = SolverConfig(k=2, lam=0.0, alpha=1e-2, max_iter=2000, epsilon=1e-4, seed=42)
    _, report = fit(inst.flows, inst.nbr, inst.views, build_mask(inst.catalog), cfg)
    losses = np.array(report.losses)
    monotone = bool(np.all(np.diff(losses) <= 0))
    ratio = losses[-1] / losses[0]
    ok = monotone and ratio < 1e-4 and report.iterations <= 2000
    return ok, f"{report.iterations} iteracoes, perda final/inicial = {ratio:.3e}, monotona = {monotone}"


def verificar_recuperacao_plantada():
    """MAE nas entradas não observadas < 1e-3 do fluxo médio"""
    inst = planted_instance(n=10, k=2, seed=42)
    mask = build_mask(inst.catalog)
    cfg = SolverConfig(k=2, lam=0.0, alpha=1e-2, max_iter=2000, epsilon=1e-4, seed=42)
    state, _ = fit(inst.flows, inst.nbr, inst.views, mask, cfg)
    truth = inst.flows.last
    pred = predict(state, inst.nbr.H, mask.Y, state.F_work[-1])
    held_out = ~mask.Y
    error = float(np.mean(np.abs(pred[held_out] - truth[held_out])))
    limit = 1e-3 * float(np.mean(truth))
    return error < limit, f"MAE = {error:.4g} (limite {limit:.4g})"


def verificar_partida_perturbada():
    """Partindo de C* perturbado a perda desce sem subir"""
    inst = planted_instance(n=10, k=2, seed=42)
    rng = np.random.default_rng(42)
    noise = rng.normal(size=inst.C_star.shape)
    C0 = inst.C_star + 0.5 * noise / np.linalg.norm(noise)
    cfg = SolverConfig(k=2, lam=0.0, alpha=1e-2, max_iter=2000, epsilon=1e-4, seed=42)
    _, report = fit(inst.flows, inst.nbr, inst.views, build_mask(inst.catalog), cfg, C0=C0, W0=inst.W_star)
    losses = np.array(report.losses)
    ok = bool(np.all(np.diff(losses) <= 0)) and losses[-1] < losses[0]
    return ok, f"{report.iterations} iteracoes, perda {losses[0]:.4g} -> {losses[-1]:.4g} ({report.stop_reason})"


def verificar_ordem_metodos(service, dataset, cfg, reps):
    """MAE(mlc) < MAE(lsknn) < MAE(nmf) na razão 0.2"""
    results = service.run_experiment(dataset, ["mlc", "lsknn", "nmf"], [0.2], reps, cfg, periods=[Period.MORNING_RUSH])
    mae = {r.method: r.mae for r in results}
    ok = mae["mlc"] < mae["lsknn"] < mae["nmf"]
    return ok, ", ".join(f"{m}={v:.3f}" for m, v in mae.items())


def verificar_tendencia_razao(service, dataset, cfg, reps):
    """MAE(mlc) na razão 0.05 <= MAE na razão 0.25"""
    results = service.run_experiment(dataset, ["mlc"], [0.05, 0.25], reps, cfg, periods=[Period.MORNING_RUSH])
    mae = {r.ratio: r.mae for r in results}
    return mae[0.05] <= mae[0.25], f"0.05 -> {mae[0.05]:.3f}, 0.25 -> {mae[0.25]:.3f}"


def verificar_estabilidade_lambda(service, dataset, cfg, reps):
    """Variação relativa do MAE < 20% para lambda em {1e-5, 1e-3, 1e-1, 1}"""
    cells = service.sweep_parameters(dataset, [2], [1e-5, 1e-3, 1e-1, 1.0], cfg, ratio=0.2, repetitions=reps,
                                     period=Period.MORNING_RUSH)
    values = [c.result.mae for c in cells]
    spread = (max(values) - min(values)) / min(values)
    detail = ", ".join(f"{c.lam:g}={c.result.mae:.3f}" for c in cells)
    return spread < 0.2, f"{detail} (variacao {100 * spread:.1f}%)"


def main():
    parser = argparse.ArgumentParser(description="Verificacoes de aceitacao em dados sinteticos")
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--n-jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)

    print("=" * 60)
    print("VERIFICACOES DE ACEITACAO")
    print("=" * 60)

    dataset = generate(SyntheticSpec(seed=args.seed, periods=(Period.MORNING_RUSH,))).as_dataset()
    service = ExperimentService(n_jobs=args.n_jobs)
    cfg = SolverConfig(seed=args.seed)

    checks = [
        ("Descida da perda (instancia plantada)", verificar_descida_plantada),
        ("Recuperacao (instancia plantada)", verificar_recuperacao_plantada),
        ("Partida perturbada (instancia plantada)", verificar_partida_perturbada),
        ("Ordem MLC-PPF < LS-KNN < NMF", lambda: verificar_ordem_metodos(service, dataset, cfg, args.reps)),
        ("Tendencia com a razao de alvos", lambda: verificar_tendencia_razao(service, dataset, cfg, args.reps)),
        ("Estabilidade em lambda", lambda: verificar_estabilidade_lambda(service, dataset, cfg, args.reps)),
    ]

    failures = 0
    for name, check in checks:
        start = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as e:
            ok, detail = False, f"Erro: {e}"
        elapsed = time.perf_counter() - start
        failures += int(not ok)
        print(f"\n{'✅' if ok else '❌'} {name} ({elapsed:.1f}s)")
        print(f"   {detail}")

    print("\n" + "-" * 60)
    print(f"{len(checks) - failures}/{len(checks)} verificacoes aprovadas")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

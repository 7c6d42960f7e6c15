"""
Testes do modelo de dados, validação, máscara e configuração
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.config import SolverConfig, resolve_settings, solver_config_from
from src.core.types import AreaCatalog, Dataset, FlowTensor, Period, ViewSet, build_mask, validate
from src.errors import InvalidInputError


def test_validate_consistent_inputs(catalog5, flows5):
    report = validate(catalog5, flows5, ViewSet.empty())
    assert report.is_valid
    assert str(report) == "ok"


def test_validate_negative_flow(catalog5, flows5):
    matrices = np.array(flows5.matrices)
    matrices[0, 1, 2] = -3
    report = validate(catalog5, FlowTensor(Period.MORNING_RUSH, matrices), ViewSet.empty())
    assert report.kinds() == ["negative-flow"]


def test_validate_view_row_mismatch(catalog5, flows5):
    views = ViewSet(views=(np.ones((4, 2)),), names=("economy",))
    report = validate(catalog5, flows5, views)
    assert report.kinds() == ["dimension"]


def test_validate_reports_every_violation(catalog5, flows5):
    matrices = np.array(flows5.matrices)
    matrices[1, 0, 0] = np.nan
    matrices[0, 3, 3] = -1
    views = ViewSet(views=(np.ones((5, 2)) * np.inf,))
    report = validate(catalog5, FlowTensor("morning", matrices), views, k=5)
    assert sorted(report.kinds()) == ["k", "nan", "nan", "negative-flow"]


def test_validate_is_pure(catalog5, flows5):
    assert validate(catalog5, flows5, ViewSet.empty(), k=9) == validate(catalog5, flows5, ViewSet.empty(), k=9)


def test_build_mask_all_known(catalog5):
    assert build_mask(catalog5).Y.all()


def test_build_mask_single_target():
    catalog = AreaCatalog(ids=["1", "2", "3"], coords=np.zeros((3, 2)), known=[True, False, True])
    Y = build_mask(catalog).Y
    expected = np.array([
        [1, 0, 1],
        [0, 0, 0],
        [1, 0, 1],
    ], dtype=bool)
    assert np.array_equal(Y, expected)


def test_build_mask_matches_target_list(rng):
    n = 117
    base = AreaCatalog(ids=[str(i) for i in range(n)], coords=rng.random((n, 2)), known=np.ones(n, dtype=bool))
    targets = rng.choice(n, size=round(0.2 * n), replace=False)
    Y = build_mask(base.with_targets(targets)).Y

    zero_rows = np.flatnonzero(~Y.any(axis=1))
    zero_cols = np.flatnonzero(~Y.any(axis=0))
    assert list(zero_rows) == sorted(targets)
    assert list(zero_cols) == sorted(targets)
    assert np.array_equal(Y, Y.T)


def test_flow_tensor_promotes_single_matrix():
    tensor = FlowTensor("afternoon", np.ones((3, 3)))
    assert tensor.days == 1
    assert tensor.period is Period.AFTERNOON_RUSH
    assert tensor.transpose().matrices.shape == (1, 3, 3)


def test_value_objects_are_read_only(flows5):
    with pytest.raises(ValueError):
        flows5.matrices[0, 0, 0] = 1.0


def test_period_parse():
    assert Period.parse("nonrush") is Period.NON_RUSH
    assert Period.parse("MORNING_RUSH") is Period.MORNING_RUSH
    with pytest.raises(ValueError):
        Period.parse("madrugada")


def test_view_names_default():
    views = ViewSet(views=(np.zeros((2, 1)), np.zeros((2, 3))))
    assert views.names == ("view1", "view2")
    assert views.concatenated().shape == (2, 4)


def test_solver_config_rejects_invalid_values():
    for bad in ({"k": 0}, {"alpha": 0.0}, {"lam": -1.0}, {"epsilon": float("nan")}, {"lam": float("inf")}):
        with pytest.raises(ValidationError):
            SolverConfig(**bad)


def test_solver_config_accepts_infinite_epsilon():
    assert math.isinf(SolverConfig(epsilon=float("inf")).epsilon)


def test_settings_precedence(tmp_path):
    config_file = tmp_path / "ppf.env"
    config_file.write_text("PPF_K=5\nPPF_LAMBDA=0.5\nPPF_DESCONHECIDA=1\n")

    from_file = resolve_settings(str(config_file))
    assert from_file["k"] == 5
    assert from_file["lam"] == 0.5

    with_flags = resolve_settings(str(config_file), {"k": 7, "lam": None})
    assert with_flags["k"] == 7
    assert with_flags["lam"] == 0.5

    cfg = solver_config_from(with_flags)
    assert cfg.k == 7


def test_dataset_missing_period_is_invalid_input(catalog5, flows5):
    dataset = Dataset(catalog=catalog5, flows={flows5.period: flows5})
    assert dataset.period("morning") is flows5
    with pytest.raises(InvalidInputError):
        dataset.period("afternoon")


def test_normalize_weights_from_config_file(tmp_path):
    config_file = tmp_path / "ppf.env"
    config_file.write_text("PPF_NORMALIZE_WEIGHTS=0\n")
    settings = resolve_settings(str(config_file))
    assert settings["normalize_weights"] is False
    assert solver_config_from(settings).normalize_weights is False
    assert SolverConfig().normalize_weights is True

"""Запуск сценариев: загрузка конфигурации, решение, запись результатов"""

import hashlib
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..config import Settings, settings as default_settings
from ..models.network import CommLedger
from ..models.nlp import PartitionedNlp
from ..models.run import IterationRecord, RunConfig, RunSummary
from ..utils.exceptions import AladinError, ConfigurationError
from .aladin import BilevelAladin
from .assignment import build_assignment, reformulate_two_assigned
from .problems import build_problem

logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parents[2] / "scenarios"

ITER_COLUMNS = [name for name in IterationRecord.model_fields if name != "ledger"] + list(
    CommLedger.model_fields
)


def parse_override(item: str) -> Tuple[List[str], Any]:
    """Разбирает key.path=value; значение читается как литерал TOML, иначе строка"""
    if "=" not in item:
        raise ConfigurationError(f"Override must look like key=value, got '{item}'")
    key, raw = item.split("=", 1)
    path = [part.strip() for part in key.split(".") if part.strip()]
    if not path:
        raise ConfigurationError(f"Override has an empty key: '{item}'")
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return path, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for item in overrides:
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Override '{item}' descends into a non-table value")
            node = child
        node[path[-1]] = value
    return data


def resolve_scenario(name_or_path: str) -> Path:
    """Путь к файлу или имя встроенного сценария из scenarios/"""
    path = Path(name_or_path)
    if path.is_file():
        return path
    builtin = SCENARIO_DIR / f"{name_or_path}.toml"
    if builtin.is_file():
        return builtin
    raise ConfigurationError(f"Scenario not found: {name_or_path}")


def load_config(source: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Читает TOML сценарий, применяет переопределения и валидирует RunConfig"""
    data: Dict[str, Any] = {}
    if source is not None:
        path = resolve_scenario(source)
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Invalid TOML in {path}: {e}")
        data.setdefault("name", path.stem)
    apply_overrides(data, overrides)
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid run configuration: {e}")


def prepare_problem(config: RunConfig) -> PartitionedNlp:
    """Строит задачу; для двухуровневых вариантов при необходимости переформулирует"""
    nlp = build_problem(config.problem, config.params, seed=config.seed)
    if config.is_bilevel and config.reformulate:
        degree = build_assignment(nlp).assignment_degree
        if degree > 2:
            logger.info(f"Problem is {degree}-assigned, reformulating to 2-assigned form")
            nlp = reformulate_two_assigned(nlp)
    return nlp


def solution_digest(xs: Sequence[np.ndarray]) -> str:
    """sha256 от решения в little-endian float64"""
    digest = hashlib.sha256()
    for x_i in xs:
        digest.update(np.ascontiguousarray(x_i, dtype="<f8").tobytes())
    return digest.hexdigest()


def _write_outputs(
    directory: Path,
    records: List[IterationRecord],
    summary: RunSummary,
    trace: Optional[List[str]],
    config: Settings,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([record.to_row() for record in records], columns=ITER_COLUMNS)
    frame.to_csv(directory / "iters.csv", index=False, float_format=f"%.{config.float_digits}g")
    # NaN и inf записываются как null
    (directory / "summary.json").write_text(summary.model_dump_json(indent=2))
    if trace is not None:
        (directory / "trace.log").write_text("".join(f"{line}\n" for line in trace))


def run(config: RunConfig, settings: Optional[Settings] = None) -> RunSummary:
    """Выполняет сценарий целиком и пишет iters.csv, summary.json, trace.log

    Коды выхода: 0 сошлось, 1 исчерпан лимит итераций, 2 ошибка решателя,
    3 ошибка конфигурации.
    """
    settings = settings or default_settings
    logger.info(f"Running '{config.name}': problem={config.problem} variant={config.variant}")

    solver: Optional[BilevelAladin] = None
    error: Optional[AladinError] = None
    nlp: Optional[PartitionedNlp] = None
    try:
        nlp = prepare_problem(config)
        solver = BilevelAladin(nlp, config, settings)
        solver.solve()
    except AladinError as e:
        logger.error(f"Run '{config.name}' aborted: {e.error_type}: {e.message}")
        error = e

    records = solver.records if solver is not None else []
    state = solver.state if solver is not None else None
    last = records[-1] if records else None
    converged = bool(state is not None and state.converged and error is None)

    xs: List[np.ndarray] = []
    if state is not None and nlp is not None:
        xs = nlp.restrict_to_original(state.x or state.z)

    if error is not None:
        exit_code = error.exit_code
    else:
        exit_code = 0 if converged else 1

    summary = RunSummary(
        name=config.name,
        variant=config.variant,
        problem=config.problem,
        converged=converged,
        outer_iterations=state.iteration if state is not None else 0,
        total_inner_iterations=sum(r.inner_iterations for r in records),
        final_consensus_residual=last.consensus_residual if last is not None else float("nan"),
        final_primal_gap=last.primal_gap if last is not None else float("nan"),
        objective=last.objective if last is not None else float("nan"),
        ledger=solver.network.ledger if solver is not None else CommLedger(),
        solution_sha256=solution_digest(xs),
        error=error.message if error is not None else None,
        exit_code=exit_code,
    )

    if config.output.directory:
        trace = solver.network.trace_lines() if solver is not None and config.output.write_trace else None
        _write_outputs(Path(config.output.directory), records, summary, trace, settings)

    logger.info(
        f"Run '{config.name}' finished: converged={summary.converged} "
        f"outer={summary.outer_iterations} inner={summary.total_inner_iterations} "
        f"local={summary.ledger.local_total} global={summary.ledger.global_total}"
    )
    return summary


def compare(
    configs: Sequence[RunConfig],
    directory: Optional[str] = None,
    settings: Optional[Settings] = None,
) -> pd.DataFrame:
    """Запускает конфигурации по очереди и сводит итоги в таблицу"""
    rows = []
    for config in configs:
        summary = run(config, settings)
        row = summary.model_dump(exclude={"ledger"})
        row.update(summary.ledger.model_dump())
        row["local_total"] = summary.ledger.local_total
        row["global_total"] = summary.ledger.global_total
        rows.append(row)
    table = pd.DataFrame(rows)
    if directory:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        digits = (settings or default_settings).float_digits
        table.to_csv(path / "comparison.csv", index=False, float_format=f"%.{digits}g")
    return table

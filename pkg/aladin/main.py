"""Командная строка решателя: python -m aladin.main --config quartic_toy"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from .config import settings
from .models.run import RunConfig
from .services.runner import compare, load_config, run
from .utils.exceptions import ConfigurationError
from .utils.logging import setup_logging

logger = logging.getLogger(__name__)

VARIANTS = ["standard", "condensed-exact", "bilevel-cg", "bilevel-admm"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aladin",
        description="Распределённая оптимизация двухуровневым ALADIN",
    )
    parser.add_argument(
        "--config",
        action="append",
        default=[],
        help="TOML сценарий или имя встроенного сценария (можно повторять)",
    )
    parser.add_argument("--variant", choices=VARIANTS, help="Вариант координации")
    parser.add_argument("--out", help="Каталог для iters.csv, summary.json и trace.log")
    parser.add_argument("--seed", type=int, help="Зерно генератора задачи")
    parser.add_argument("--max-outer", type=int, help="Лимит внешних итераций")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Переопределение параметра сценария, например inner.n_cg=40",
    )
    parser.add_argument(
        "--compare",
        nargs="+",
        choices=VARIANTS,
        metavar="VARIANT",
        help="Запустить сценарии с перечисленными вариантами и свести итоги в comparison.csv",
    )
    return parser


def _cli_overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.variant:
        overrides.append(f'variant="{args.variant}"')
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.max_outer is not None:
        overrides.append(f"outer.max_iterations={args.max_outer}")
    return overrides


def _with_output(config: RunConfig, directory: Optional[str]) -> RunConfig:
    if not directory:
        return config
    output = config.output.model_copy(update={"directory": directory})
    return config.model_copy(update={"output": output})


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging(settings)
    args = build_parser().parse_args(argv)
    sources = args.config or [None]

    try:
        configs = [load_config(source, _cli_overrides(args)) for source in sources]
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e.message}")
        return e.exit_code

    if args.compare or len(configs) > 1:
        runs = []
        for config in configs:
            for variant in args.compare or [config.variant]:
                name = f"{config.name}-{variant}"
                directory = f"{args.out}/{name}" if args.out else None
                variant_config = config.model_copy(update={"variant": variant, "name": name})
                runs.append(_with_output(variant_config, directory))
        table = compare(runs, directory=args.out)
        print(table.to_string(index=False))
        return int(table["exit_code"].max())

    summary = run(_with_output(configs[0], args.out))
    print(summary.model_dump_json(indent=2))
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())

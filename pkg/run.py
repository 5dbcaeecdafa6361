#!/usr/bin/env python3
"""Скрипт управления решателем двухуровневого ALADIN"""

import sys
import subprocess
import argparse


def solve_scenario(scenario, extra):
    """Запуск одного сценария"""
    print(f"🚀 Решение сценария {scenario}...")
    result = subprocess.run([
        sys.executable, "-m", "aladin.main",
        "--config", scenario,
        *extra
    ], check=False)
    if result.returncode == 0:
        print("✅ Решение сошлось")
    elif result.returncode == 1:
        print("⚠️  Исчерпан лимит внешних итераций")
    else:
        print(f"❌ Ошибка решателя (код {result.returncode})")
    sys.exit(result.returncode)


def compare_variants(scenario, extra):
    """Сравнение всех вариантов координации на сценарии"""
    print(f"📊 Сравнение вариантов на сценарии {scenario}...")
    result = subprocess.run([
        sys.executable, "-m", "aladin.main",
        "--config", scenario,
        "--compare", "standard", "condensed-exact", "bilevel-cg", "bilevel-admm",
        *extra
    ], check=False)
    sys.exit(result.returncode)


def run_tests(with_slow):
    """Запуск тестов"""
    print("🧪 Запуск тестов...")
    command = [sys.executable, "-m", "pytest", "tests/", "-v", "--tb=short"]
    if not with_slow:
        command += ["-m", "not slow"]
    result = subprocess.run(command, check=False)
    if result.returncode == 0:
        print("✅ Все тесты прошли успешно!")
    else:
        print("❌ Некоторые тесты не прошли")
        sys.exit(1)


def install_deps():
    """Установка зависимостей"""
    print("📦 Установка зависимостей...")
    try:
        subprocess.run([
            sys.executable, "-m", "pip", "install",
            "-r", "requirements-dev.txt"
        ], check=True)
        print("✅ Зависимости установлены успешно!")
    except subprocess.CalledProcessError as e:
        print(f"❌ Ошибка установки зависимостей: {e}")
        sys.exit(1)


def lint_code():
    """Проверка кода линтерами"""
    print("🔍 Проверка кода...")

    print("  Форматирование с Black...")
    try:
        subprocess.run([
            sys.executable, "-m", "black",
            "aladin/", "tests/", "--check"
        ], check=True)
        print("  ✅ Black: код отформатирован правильно")
    except subprocess.CalledProcessError:
        print("  ⚠️  Black: требуется форматирование")

    print("  Проверка с Flake8...")
    try:
        subprocess.run([
            sys.executable, "-m", "flake8",
            "aladin/", "tests/"
        ], check=True)
        print("  ✅ Flake8: проблем не найдено")
    except subprocess.CalledProcessError:
        print("  ❌ Flake8: найдены проблемы")


def main():
    """Главная функция"""
    parser = argparse.ArgumentParser(description="Управление решателем ALADIN")
    parser.add_argument(
        "command",
        choices=["solve", "compare", "test", "install", "lint"],
        help="Команда для выполнения"
    )
    parser.add_argument("scenario", nargs="?", default="quartic_toy", help="Сценарий для solve/compare")
    parser.add_argument("--slow", action="store_true", help="Включить медленные тесты")

    args, extra = parser.parse_known_args()

    if args.command == "solve":
        solve_scenario(args.scenario, extra)
    elif args.command == "compare":
        compare_variants(args.scenario, extra)
    elif args.command == "test":
        run_tests(args.slow)
    elif args.command == "install":
        install_deps()
    elif args.command == "lint":
        lint_code()


if __name__ == "__main__":
    main()

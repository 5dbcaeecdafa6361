"""Конфигурация решателя"""

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Настройки по умолчанию, переопределяются через окружение ALADIN_*"""

    # Внешний цикл
    tol_outer: float = 1e-6

    # Локальные задачи
    tol_local: float = 1e-9
    tol_feas: float = 1e-8
    tol_comp: float = 1e-8
    eps_act: float = 1e-6
    reg_floor: float = 1e-6
    local_max_iterations: int = 500
    local_polish_iterations: int = 50

    # Внутренние решатели
    inner_max_iterations: int = 5000
    admm_check_every: int = 10
    admm_burn_in: int = 20
    # Нижняя граница цели невязки: max(η‖m(p)‖, floor·‖Σ s̃_i‖)
    inner_residual_floor: float = 0.0

    # Проверки
    check_condensed: bool = True
    fd_step: float = 1e-6
    fd_tolerance: float = 1e-5
    fd_samples: int = 3

    # Производительность
    max_workers: int = 1  # размер пула для локальных шагов

    # Вывод
    float_digits: int = 17
    log_level: str = "INFO"
    log_format: str = "text"  # json или text

    class Config:
        env_file = ".env"
        env_prefix = "ALADIN_"
        case_sensitive = False


# Глобальный экземпляр настроек
settings = Settings()

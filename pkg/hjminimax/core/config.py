"""Numerical defaults and runtime settings."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """hjminimax settings loaded from environment variables."""

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False)

    # Characteristic flow - fixed-step RK4
    HJ_RK4_STEPS: int = 64
    HJ_BLOWUP_CAP: float = 1e8

    # Shooting - Newton on the momentum component
    HJ_NEWTON_MAX_ITER: int = 50
    HJ_NEWTON_TOL: float = 1e-9
    HJ_FD_STEP: float = 1e-5
    HJ_FD_FALLBACK_STEP: float = 1e-6
    HJ_SHOOTING_RETRIES: int = 3

    # Minimax selector
    HJ_WINDOW_MARGIN: float = 0.2
    HJ_GRID_X0: int = 41
    HJ_GRID_Y: int = 41
    HJ_REFINE_LEVELS: int = 4
    HJ_REFINE_FACTOR: int = 4
    HJ_Y_BOUND_CAP: float = 50.0

    # Truncation cutoff
    HJ_CUTOFF_SLOPE: float = 0.9

    # Lax-Friedrichs reference
    HJ_LF_CFL: float = 0.9

    # Parallel node sweeps
    HJ_THREADS: int = 1

    # Logging
    HJ_LOG_LEVEL: str = "INFO"
    HJ_LOG_JSON: bool = False
    HJ_LOG_FILE: str = ""

settings = Settings()

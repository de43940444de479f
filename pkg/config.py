"""
Configuration module for basket-ssd
Handles all environment variables and application settings
"""

import os
from typing import Optional
from dataclasses import dataclass
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


def _env_threads() -> int:
    value = os.getenv('BASKET_SSD_THREADS', '')
    if value.strip():
        return int(value)
    return os.cpu_count() or 1


@dataclass
class AppConfig:
    """Application configuration class"""

    # Logging
    log_level: str = os.getenv('LOG_LEVEL', 'INFO')
    logs_dir: str = os.getenv('LOGS_DIR', './logs')
    log_to_file: bool = _env_flag('LOG_TO_FILE', 'true')

    # File Paths
    max_config_size: int = int(os.getenv('MAX_CONFIG_SIZE', '1048576'))  # 1MB default

    # Solver Settings
    newton_tol: float = float(os.getenv('NEWTON_TOL', '1e-8'))
    newton_max_iter: int = int(os.getenv('NEWTON_MAX_ITER', '100'))
    default_c0: float = float(os.getenv('DEFAULT_C0', '0.05'))

    # Simulation Settings
    threads: int = _env_threads()
    default_replicates: int = int(os.getenv('DEFAULT_REPLICATES', '100000'))
    default_seed: int = int(os.getenv('DEFAULT_SEED', '20210101'))
    chunk_size: int = int(os.getenv('SIM_CHUNK_SIZE', '10000'))

    def validate(self) -> bool:
        """Validate configuration settings"""
        if self.log_level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            raise ValueError("LOG_LEVEL must be one of DEBUG, INFO, WARNING, ERROR, CRITICAL")

        if self.max_config_size <= 0:
            raise ValueError("MAX_CONFIG_SIZE must be positive")

        if not 0.0 < self.newton_tol < 1.0:
            raise ValueError("NEWTON_TOL must be between 0 and 1")

        if self.newton_max_iter <= 0:
            raise ValueError("NEWTON_MAX_ITER must be positive")

        if self.default_c0 <= 0:
            raise ValueError("DEFAULT_C0 must be positive")

        if self.threads <= 0:
            raise ValueError("BASKET_SSD_THREADS must be positive")

        if self.default_replicates <= 0:
            raise ValueError("DEFAULT_REPLICATES must be positive")

        # Chunking fixes the random substreams, so it must not depend on threads
        if self.chunk_size <= 0:
            raise ValueError("SIM_CHUNK_SIZE must be positive")

        return True

    def resolve_threads(self, requested: Optional[int] = None) -> int:
        """Thread count for simulations; BASKET_SSD_THREADS wins over the CLI flag"""
        if os.getenv('BASKET_SSD_THREADS', '').strip():
            return self.threads
        if requested is not None and requested > 0:
            return requested
        return self.threads

# Global configuration instance
config = AppConfig()

def get_config() -> AppConfig:
    """Get the global configuration instance"""
    return config

"""
Design config file validation utilities for basket-ssd
"""

from typing import Tuple, Union
from pathlib import Path
from config import get_config
from utils.logger import get_logger

logger = get_logger(__name__)

ALLOWED_EXTENSIONS = ('.json',)


class ConfigFileValidator:
    """Validates design config files for existence, size and type before parsing"""

    def __init__(self):
        self.config = get_config()

    def validate_file(self, path: Union[str, Path]) -> Tuple[bool, str]:
        """
        Validate a design config path

        Args:
            path: Path to the JSON design config

        Returns:
            Tuple of (is_valid, error_message)
        """
        try:
            config_path = Path(path)
            if not config_path.is_file():
                return False, f"Config file not found: {config_path}"

            # Check file extension
            if not self._is_allowed_extension(config_path.suffix.lower()):
                allowed_types = ", ".join(ALLOWED_EXTENSIONS)
                return False, f"Config type not allowed. Allowed types: {allowed_types}"

            size = config_path.stat().st_size
            if size > self.config.max_config_size:
                return False, f"Config size exceeds maximum allowed size of {self.config.max_config_size} bytes"

            if size == 0:
                return False, "Config file is empty"

            return True, ""

        except OSError as e:
            logger.error(f"Error validating config {path}: {str(e)}")
            return False, f"Error validating config: {str(e)}"

    def _is_allowed_extension(self, extension: str) -> bool:
        """Check if file extension is allowed"""
        return extension in ALLOWED_EXTENSIONS

    def get_file_info(self, path: Union[str, Path]) -> dict:
        """
        Get config file information

        Args:
            path: Path to the config file

        Returns:
            Dictionary with file information
        """
        config_path = Path(path)
        return {
            'name': config_path.name,
            'size': config_path.stat().st_size,
            'extension': config_path.suffix.lower()
        }

import logging
import os
from typing import Any, Dict


class Config:
    """
    Numerical defaults for crext.
    Loads configuration from environment variables with fallbacks to default values.
    """

    def __init__(self) -> None:
        # Logging Configuration
        self.log_level = os.getenv("CREXT_LOG_LEVEL", "INFO")

        # Bishop solver
        self.grid_size = _int_env("CREXT_GRID", 2048)
        self.max_grid_size = _int_env("CREXT_MAX_GRID", 2**16)
        self.picard_tol = _float_env("CREXT_PICARD_TOL", 1e-11)
        self.manifold_tol = _float_env("CREXT_TOL_M", 1e-8)
        self.holomorphy_tol = _float_env("CREXT_TOL_H", 1e-8)
        self.max_iter = _int_env("CREXT_MAX_ITER", 500)
        self.spectral_tail = _float_env("CREXT_SPECTRAL_TAIL", 1e-8)

        # Algebra and sectors
        self.rank_rtol = _float_env("CREXT_RANK_RTOL", 1e-9)
        self.sector_samples = _int_env("CREXT_SECTOR_SAMPLES", 8192)
        self.root_xtol = _float_env("CREXT_ROOT_XTOL", 1e-12)
        self.filtration_cap = _int_env("CREXT_FILTRATION_CAP", 6)
        self.constraint_c = _float_env("CREXT_CONSTRAINT_C", 0.5)
        self.lp_tol = _float_env("CREXT_LP_TOL", 1e-9)

        # Initialize logging
        self._setup_logging()

        self._validate_config()

    def _setup_logging(self) -> None:
        """
        Set up logging configuration.
        """
        numeric_level = getattr(logging, self.log_level.upper(), None)
        if not isinstance(numeric_level, int):
            numeric_level = logging.INFO

        logging.basicConfig(
            level=numeric_level,
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        )

    def _validate_config(self) -> None:
        """
        Replace unusable values by their defaults, warning about each one.
        """
        if self.grid_size < 64 or self.grid_size & (self.grid_size - 1):
            logging.warning("CREXT_GRID=%s is not a power of two >= 64, using 2048", self.grid_size)
            self.grid_size = 2048
        if self.max_grid_size < self.grid_size:
            logging.warning("CREXT_MAX_GRID below CREXT_GRID, using %s", self.grid_size)
            self.max_grid_size = self.grid_size
        for name in ("picard_tol", "manifold_tol", "holomorphy_tol", "rank_rtol", "root_xtol"):
            if getattr(self, name) <= 0:
                logging.warning("Non-positive tolerance %s, falling back to default", name)
                setattr(self, name, _DEFAULT_TOLERANCES[name])
        if self.filtration_cap < 2:
            logging.warning("CREXT_FILTRATION_CAP must be at least 2, using 6")
            self.filtration_cap = 6

    def get_solver_config(self) -> Dict[str, Any]:
        """
        Get the Bishop solver defaults as a dictionary.
        """
        return {
            "grid": self.grid_size,
            "max_grid": self.max_grid_size,
            "tol": self.picard_tol,
            "max_iter": self.max_iter,
            "spectral_tail": self.spectral_tail,
        }

    def get_tolerances(self) -> Dict[str, float]:
        return {
            "picard": self.picard_tol,
            "manifold": self.manifold_tol,
            "holomorphy": self.holomorphy_tol,
            "rank_rtol": self.rank_rtol,
            "root_xtol": self.root_xtol,
            "lp": self.lp_tol,
        }


_DEFAULT_TOLERANCES = {
    "picard_tol": 1e-11,
    "manifold_tol": 1e-8,
    "holomorphy_tol": 1e-8,
    "rank_rtol": 1e-9,
    "root_xtol": 1e-12,
}


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        logging.warning("Ignoring %s=%r (not an integer)", name, raw)
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        logging.warning("Ignoring %s=%r (not a number)", name, raw)
        return default


# Create a singleton instance
config = Config()

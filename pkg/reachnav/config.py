# reachnav/config.py
# Configuration settings for the simulator, the CLI and the HTTP service

import os
import logging
from dataclasses import dataclass
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file
basedir = os.path.abspath(os.path.dirname(__file__))
project_root = os.path.abspath(os.path.join(basedir, '..')) # Go up one level from reachnav/
dotenv_path = os.path.join(project_root, '.env')
if os.path.exists(dotenv_path):
    load_dotenv(dotenv_path=dotenv_path)
    logger.debug("Loaded environment variables from: %s", dotenv_path)


@dataclass(frozen=True)
class SolverTolerances:
    """Every numeric tolerance the solvers and checks use, in one record."""
    feasibility: float = 1e-7
    distance: float = 1e-6
    projection: float = 1e-9
    membership: float = 1e-9
    unit_norm: float = 1e-9
    facet_contact: float = 1e-7
    kkt: float = 1e-4
    qp_max_iter: int = 5000
    gjk_max_iter: int = 200


TOLERANCES = SolverTolerances()


class Config:
    """Base configuration class."""
    SECRET_KEY = os.environ.get('SECRET_KEY') or 'dev-only-change-me'

    # --- Logging ---
    LOG_LEVEL = os.environ.get('REACHNAV_LOG_LEVEL', 'INFO').upper()

    # --- Geometry ---
    HULL_COPLANAR_TOL = float(os.environ.get('REACHNAV_HULL_COPLANAR_TOL') or 1e-8)
    DEFAULT_VOXEL = float(os.environ.get('REACHNAV_DEFAULT_VOXEL') or 0.05)

    # --- Reachability ---
    REACH_DT = float(os.environ.get('REACHNAV_REACH_DT') or 1e-3)

    # --- Receding-horizon QP ---
    QP_SOLVER = os.environ.get('REACHNAV_QP_SOLVER') or 'CLARABEL'

    # --- Fixtures ---
    FIXTURES_DIR = os.environ.get('REACHNAV_FIXTURES_DIR') or os.path.join(project_root, 'fixtures')

    # --- Flask App Config ---
    DEBUG = os.environ.get('FLASK_DEBUG', 'False').lower() == 'true'
    HOST = os.environ.get('REACHNAV_HOST', '127.0.0.1')
    PORT = int(os.environ.get('REACHNAV_PORT') or 5000)


def configure_logging(level=None):
    """Configure the root logger once for CLI and server entry points."""
    logging.basicConfig(
        level=level or Config.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

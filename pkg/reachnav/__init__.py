# reachnav/__init__.py
# Main application package initialization: polytopic reachability and safe navigation.

import logging

from flask import Flask

from .config import Config, configure_logging

logger = logging.getLogger(__name__)


def create_app(config_class=Config):
    """Creates and configures the Flask application."""
    app = Flask(__name__)
    app.config.from_object(config_class)
    # result documents keep their field order
    app.json.sort_keys = False
    configure_logging(app.config.get('LOG_LEVEL'))

    app.secret_key = app.config.get('SECRET_KEY')
    if app.secret_key == 'dev-only-change-me' and not app.debug:
        logger.warning("Using default SECRET_KEY in non-debug mode. Please set SECRET_KEY in your .env file.")

    logger.info("Flask app created. Fixtures dir: %s, QP solver: %s",
                app.config.get('FIXTURES_DIR'), app.config.get('QP_SOLVER'))

    # JSON error handlers
    from . import utils
    utils.init_app(app)

    # Register Blueprints
    from .routes import sim_bp  # /health, /plan, /verify
    from .geometry_api import geometry_bp  # /api/hull, /api/reach

    app.register_blueprint(sim_bp)
    app.register_blueprint(geometry_bp)
    logger.info("Blueprints registered (simulator and geometry API).")

    return app

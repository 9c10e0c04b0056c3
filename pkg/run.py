# run.py
# Development server for the planning/verification HTTP API (see reachnav/routes.py).

import logging

from reachnav import create_app
from reachnav.config import Config

logger = logging.getLogger(__name__)

app = create_app()

if __name__ == '__main__':
    logger.info("Serving reachnav API on %s:%d (debug=%s)", Config.HOST, Config.PORT, Config.DEBUG)
    # Use a WSGI server such as Gunicorn or Waitress outside development
    app.run(host=Config.HOST, port=Config.PORT, debug=Config.DEBUG)

"""
Multi-Dimensional Mean-Payoff and Energy Games
Main application entry point
"""

import sys
import logging

# Setup logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

from src.cli import run

if __name__ == '__main__':
    try:
        sys.exit(run(sys.argv[1:]))
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        sys.exit(130)
    except Exception as e:
        logger.error(f"Application error: {e}")
        raise

#!/usr/bin/env python3
"""
Transition Toolkit Environment Loader
Loads run settings from environment variables (.env) and configures logging
"""

import os
import logging
from dotenv import load_dotenv

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
VALID_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
VALID_SYSTEMS = ('ewalk', 'autonomyo', 'custom')

logger = logging.getLogger(__name__)


def configure_logging(level='INFO'):
    """
    Configure root logging once for CLI runs

    Args:
        level (str): Logging level name
    """
    level = str(level).upper()
    if level not in VALID_LEVELS:
        level = 'INFO'
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level))
    logger.debug(f"Logging configured: level={level}")


def load_config_from_env():
    """
    Load toolkit settings from environment variables

    Returns:
        dict: Settings with log_level, output_dir, data_dir and system.
              Unset variables are omitted so built-in defaults still apply.
    """
    # Load environment variables from .env file
    load_dotenv()

    env_map = {
        'log_level': 'TRANSITION_LOG_LEVEL',
        'output_dir': 'TRANSITION_OUTPUT_DIR',
        'data_dir': 'TRANSITION_DATA_DIR',
        'system': 'TRANSITION_SYSTEM',
    }

    config = {}
    for key, var in env_map.items():
        value = os.getenv(var)
        if value:
            config[key] = value.strip()

    if 'system' in config:
        config['system'] = config['system'].lower()

    if config:
        logger.info(f"Environment settings loaded: {sorted(config)}")

    return config


def validate_config(config):
    """
    Validate environment settings

    Args:
        config (dict): Settings from load_config_from_env()

    Returns:
        bool: True if valid, False otherwise
    """
    if config is None:
        return False

    level = config.get('log_level')
    if level and level.upper() not in VALID_LEVELS:
        logger.error(f"TRANSITION_LOG_LEVEL must be one of {', '.join(VALID_LEVELS)}")
        return False

    system = config.get('system')
    if system and system not in VALID_SYSTEMS:
        logger.error(f"TRANSITION_SYSTEM must be one of {', '.join(VALID_SYSTEMS)}")
        return False

    data_dir = config.get('data_dir')
    if data_dir and not os.path.isdir(data_dir):
        logger.error(f"TRANSITION_DATA_DIR does not exist: {data_dir}")
        return False

    return True


if __name__ == "__main__":
    """Test environment loading when run directly"""
    print("🔍 Testing Transition Toolkit Environment")
    print("=" * 40)

    config = load_config_from_env()

    if validate_config(config):
        print("✅ Environment loaded successfully!")
        for key, value in sorted(config.items()):
            print(f"   {key}: {value}")
        if not config:
            print("   (no overrides set, built-in defaults apply)")
    else:
        print("❌ Environment validation failed")
        print("\n💡 Supported .env entries:")
        print("TRANSITION_LOG_LEVEL=INFO")
        print("TRANSITION_OUTPUT_DIR=results")
        print("TRANSITION_DATA_DIR=data")
        print("TRANSITION_SYSTEM=ewalk")

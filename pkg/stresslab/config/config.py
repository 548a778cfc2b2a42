"""
Configuration for stresslab
"""
import os
import uuid
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Base directory of the project
BASE_DIR = Path(__file__).parent.parent.parent.absolute()

# Shipped inputs (WEO baselines, exemplar scenario, episode metrics, run config)
DATA_DIR = os.getenv("STRESSLAB_DATA_DIR", str(BASE_DIR / "data"))
FIXTURES_DIR = os.getenv("STRESSLAB_FIXTURES_DIR", str(Path(DATA_DIR) / "fixtures"))
DEFAULT_RUN_CONFIG = os.getenv("STRESSLAB_RUN_CONFIG", str(Path(FIXTURES_DIR) / "run_config.json"))

# Where run artifacts land unless --out is given
OUTPUT_DIR = os.getenv("STRESSLAB_OUTPUT_DIR", str(BASE_DIR / "runs" / "latest"))

# Embedding model for the neural retrieval provider
EMBEDDING_MODEL = os.getenv("EMBEDDING_MODEL", "all-MiniLM-L6-v2")

# Zero-shot NLI checkpoint for the neural regime classifier
REGIME_MODEL = os.getenv("REGIME_MODEL", "MoritzLaurer/DeBERTa-v3-base-mnli-fever-anli")

# Default seed when neither the run config nor --seed sets one
DEFAULT_SEED = int(os.getenv("STRESSLAB_SEED", "42"))

# Upper bound on worker pools (unset means per-pool defaults)
STRESSLAB_WORKERS = os.getenv("STRESSLAB_WORKERS")

# Name of the environment variable holding the HTTP provider's API key
HTTP_API_KEY_ENV = os.getenv("HTTP_API_KEY_ENV", "STRESSLAB_API_KEY")

# Logging settings
LOG_DIR = os.getenv("LOG_DIR", str(BASE_DIR / "logs"))
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


def generate_run_id():
    """Generate a unique run ID for a pipeline invocation"""
    return str(uuid.uuid4())


def ensure_directories(*extra):
    """Create necessary directories if they don't exist"""
    directories = [OUTPUT_DIR, LOG_DIR, *extra]

    for directory in directories:
        os.makedirs(directory, exist_ok=True)


if __name__ == "__main__":
    # When run directly, create all directories and show configuration
    ensure_directories()

    print("\n" + "=" * 60)
    print("stresslab configuration")
    print("=" * 60)
    print(f"Base Directory: {BASE_DIR}")
    print(f"Fixtures Dir: {FIXTURES_DIR}")
    print(f"Run Config: {DEFAULT_RUN_CONFIG}")
    print(f"Output Dir: {OUTPUT_DIR}")
    print(f"Log Dir: {LOG_DIR}")
    print(f"Embedding Model: {EMBEDDING_MODEL}")
    print(f"Regime Model: {REGIME_MODEL}")
    print(f"Default Seed: {DEFAULT_SEED}")
    print(f"Worker Cap: {STRESSLAB_WORKERS or 'unset'}")
    print("=" * 60)

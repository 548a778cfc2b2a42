"""
Worker configuration for stresslab
Defines worker pool sizes and provider operational parameters
"""
import os

# Worker pool sizes
WORKER_CONFIG = {
    # Generation cells hit providers; HTTP latency dominates
    'generation_workers': 4,

    # Scenario x channel Monte Carlo jobs
    'simulation_workers': 2,

    # Artifact hashing at manifest time
    'hashing_workers': 4,
}

# Provider call settings (seconds)
HTTP_TIMEOUT = 60

# Retry configuration
MAX_RETRIES = 1
RETRY_DELAY_BASE = 2  # seconds, exponential backoff

# Monte Carlo block size; one generator stream per block
SIMULATION_BLOCK_PATHS = 1000

# Component-specific settings
COMPONENT_SETTINGS = {
    'generation': {
        'temperature': 0.0,
        'max_tokens': 1024,
    },
    'kmeans': {
        'max_iter': 50,
        'tol': 1e-9,
    },
    'garch': {
        'min_obs': 250,
        'start_alpha': (0.05, 0.1),
        'start_beta': (0.8, 0.9),
        'start_nu': (5.0, 8.0),
    },
}


def resolve_workers(kind, cap=None):
    """Pool size for `kind`, capped by STRESSLAB_WORKERS when set"""
    size = WORKER_CONFIG.get(f"{kind}_workers", 1)
    raw = cap if cap is not None else os.getenv("STRESSLAB_WORKERS")
    if raw:
        try:
            size = min(size, max(1, int(raw)))
        except ValueError:
            pass
    return max(1, size)

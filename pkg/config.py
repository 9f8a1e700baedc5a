"""
Configuration for the inference engine and experiment runners
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Numerics
CLAMP_FLOOR = float(os.getenv("CLAMP_FLOOR", "1e-12"))

# Solver defaults (every CLI flag overrides these)
DEFAULT_DAMPING = float(os.getenv("DEFAULT_DAMPING", "0.5"))
DEFAULT_TOLERANCE = float(os.getenv("DEFAULT_TOLERANCE", "1e-6"))
DEFAULT_MAX_ITERS = int(os.getenv("DEFAULT_MAX_ITERS", "500"))
DEGENERATE_EXPONENT = os.getenv("DEGENERATE_EXPONENT", "error")  # "error" or "fixed:<w>"

# Exact oracle caps (joint states)
ORACLE_MAX_STATES = int(os.getenv("ORACLE_MAX_STATES", str(2**24)))
ORACLE_MAX_TEMPORAL_STATES = int(os.getenv("ORACLE_MAX_TEMPORAL_STATES", str(2**12)))

# Experiment defaults
DEFAULT_THETA_DT = float(os.getenv("DEFAULT_THETA_DT", "0.1"))
ISING_VARIANCE = float(os.getenv("ISING_VARIANCE", "0.1"))

# Runtime
MAX_WORKERS = int(os.getenv("MAX_WORKERS", "1"))
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE")

# Directories
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./output")

"""
Configuration settings for the quadtree ladder toolkit
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Block geometry
SUPERBLOCK_SIZE = 64
MIN_BLOCK_SIZE = 4
MAX_DEPTH = 4

# RDO Configuration
SPLIT_BITS = float(os.getenv("QTREE_SPLIT_BITS", "16.0"))
HEADER_BITS = float(os.getenv("QTREE_HEADER_BITS", "8.0"))
LAMBDA_SCALE = float(os.getenv("QTREE_LAMBDA_SCALE", "0.85"))
DEFAULT_QPS = [22, 27, 32, 37]

# Inference model Configuration
MARGIN_GRID = tuple(range(8, 129, 8))
TAU_GRID = tuple(k / 10 for k in range(11))
DEFAULT_EPSILON = float(os.getenv("QTREE_EPSILON", "0.1"))
MIN_CALIBRATION_SAMPLES = int(os.getenv("QTREE_MIN_SAMPLES", "50"))
ERROR_RATE_DENOMINATOR = os.getenv("QTREE_ERROR_RATE_DENOMINATOR", "joint")  # Options: 'joint', 'conditional'

# Group schedule Configuration
GROUP_SIZE = int(os.getenv("QTREE_GROUP_SIZE", "50"))
TRAIN_COUNT = int(os.getenv("QTREE_TRAIN_COUNT", "5"))

# Execution Configuration
N_JOBS = int(os.getenv("QTREE_N_JOBS", "1"))
SUPERBLOCK_JOBS = int(os.getenv("QTREE_SUPERBLOCK_JOBS", "1"))
LOG_LEVEL = os.getenv("QTREE_LOG_LEVEL", "INFO")

# Reporting Configuration
COST_BUDGET = float(os.getenv("QTREE_COST_BUDGET", "0.02"))

# Simulator Configuration
SIM_SEED = int(os.getenv("QTREE_SIM_SEED", "2019"))
SIM_REPLICATIONS = int(os.getenv("QTREE_SIM_REPLICATIONS", "10000"))
SIM_CHUNK_SIZE = 1000

# Path Configuration
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(BASE_DIR, "data")
PRESETS_DIR = os.path.join(DATA_DIR, "presets")
OUTPUT_DIR = os.getenv("QTREE_OUTPUT_DIR", os.path.join(BASE_DIR, "output"))

# Ensure directories exist
os.makedirs(DATA_DIR, exist_ok=True)
os.makedirs(PRESETS_DIR, exist_ok=True)

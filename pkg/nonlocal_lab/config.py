import os
import re
from pathlib import Path
from typing import Dict, List, Pattern

from dotenv import load_dotenv

load_dotenv()

CONFIG_DIR: Path = Path(__file__).resolve().parent
PROJECT_ROOT: Path = CONFIG_DIR.parent

OUTPUT_DIR: Path = Path(os.getenv('NONLOCAL_LAB_OUTPUT_DIR', str(PROJECT_ROOT / 'outputs')))
LOG_LEVEL: str = os.getenv('NONLOCAL_LAB_LOG_LEVEL', 'INFO').upper()

# Numerical tolerances
NORM_TOL: float = 1e-12
NORM_INPUT_TOL: float = 1e-9
OPERATOR_TOL: float = 1e-12
UNITARY_TOL: float = 1e-10
PROJECTOR_TOL: float = 1e-10
PROB_TOL: float = 1e-10
PHASE_TOL: float = 1e-10
PSD_TOL: float = 1e-10
LATTICE_TOL: float = 1e-9
SIGNAL_TOL: float = 1e-9
ERASURE_TOL: float = 1e-10
SCHMIDT_CUTOFF: float = 1e-12
POSITIVE_FLOOR: float = 1e-6

MAX_TOTAL_DIM: int = 2 ** 14
DENOMINATOR_BOUND: int = 64
MAX_BRANCHES: int = 200_000

# Protocol defaults
DEFAULT_MAX_ROUNDS: int = 8
DEFAULT_TRIALS: int = 1
DEFAULT_FORMAT: str = 'json'
SPIN_SPACING: float = 0.5
SPIN_SUM_DIAL: int = 5

# Audit settings
PHI_GRID_POINTS: int = 32
# The remote sigma_z sample alone moves p(A up) by |sin 4phi| / 2, at least sin(pi/8) / 2 ~ 0.191 off the n*pi/4 points.
PHI_SCAN_THRESHOLD: float = 0.05
HAAR_SAMPLES: int = 200
PV_THEOREM1_STATES: int = 50
PV_THEOREM2_CASES: int = 100
ENTANGLED_PROJECTOR_ALPHA_SQ: float = 0.8
# sigma_z at the remote site alone moves p(A up) by 0.8 - 0.8*(0.6**2 + 4*0.2**2).
ENTANGLED_PROJECTOR_PINNED: float = 0.384
DEGENERATE_DEMO_ALPHA1: float = 2 ** -0.5

EXIT_CODES: Dict[str, int] = {
    'success': 0,
    'usage': 2,
    'precondition': 3,
    'resource': 4,
    'invariant': 5,
    'io': 6,
}

FORMATS: List[str] = ['json', 'csv']
LOG_LEVELS: List[str] = ['DEBUG', 'INFO', 'SUCCESS', 'WARN', 'ERROR']

TRANSCRIPT_FILENAME: str = 'transcript.jsonl'
SUMMARY_FILENAME: str = 'summary.json'
FREQUENCY_FILENAME: str = 'frequencies.csv'
REPORT_FILENAME: str = 'report.json'
PHI_SCAN_FILENAME: str = 'phi_scan.csv'

CANONICAL_STATE_PATTERN: Pattern[str] = re.compile(r"canonical\((?P<K>\d+),\s*(?P<M>\d+)\)")
TWISTED_STATE_PATTERN: Pattern[str] = re.compile(r"twisted_(?P<index>[1-4])(?:@(?P<alpha>[-+0-9.eE]+|pi/\d+))?")
BASIS_STATE_PATTERN: Pattern[str] = re.compile(r"basis_(?P<index>[1-4])")
PRODUCT_STATE_PATTERN: Pattern[str] = re.compile(r"product\((?P<spins>[ud+\-]+)\)")
AMPLITUDE_STATE_PATTERN: Pattern[str] = re.compile(
    r"amps(?:\[(?P<dims>\d+(?:x\d+)*)\])?:(?P<body>.+)"
)
CONFIG_LINE_PATTERN: Pattern[str] = re.compile(r"(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*)")

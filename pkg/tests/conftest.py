import sys
from pathlib import Path

# Let test modules import sibling helpers (fixtures_weng, oracles) directly.
sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

"""
Utility Functions
Helper functions used across the emulator, the runner and the CLI.
"""

import json
import os
import sys
from collections import Counter
from datetime import datetime


def ensure_dir(directory: str) -> str:
    """Ensure directory exists, create if not."""
    if directory:
        os.makedirs(directory, exist_ok=True)
    return directory


def save_json(data: dict, filepath: str) -> None:
    """Save dictionary to JSON file."""
    ensure_dir(os.path.dirname(filepath))
    with open(filepath, 'w') as f:
        json.dump(data, f, indent=2, default=str)


def get_project_root() -> str:
    """Get the project root directory."""
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def bundled_config_dir() -> str:
    """Directory holding the bundled example problems."""
    return os.path.join(get_project_root(), 'data', 'configs')


def log_execution(func_name: str, message: str) -> None:
    """Timestamped progress line on stderr. QSIM_QUIET=1 silences it."""
    if os.environ.get('QSIM_QUIET'):
        return
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    print(f"[{timestamp}] {func_name}: {message}", file=sys.stderr)


def format_count(num: int) -> str:
    """Format large amplitude counts with K/M suffixes."""
    if num >= 1_000_000:
        return f"{num/1_000_000:.1f}M"
    elif num >= 1_000:
        return f"{num/1_000:.1f}K"
    else:
        return str(int(num))


class GateTally:
    """Count gate and phase applications by kind during an instrumented run."""

    KINDS = (
        'hadamard',
        'controlled_phase',
        'swap',
        'single_qubit_unitary',
        'diagonal_phase_applications',
        'kinetic_phase_applications',
        'exact_term_applications',
        'literal_term_applications',
    )

    def __init__(self):
        self.counts = Counter()

    def add(self, kind: str, n: int = 1) -> None:
        """Add n applications of a kind."""
        self.counts[kind] += n

    def get(self, kind: str) -> int:
        return self.counts.get(kind, 0)

    def report(self) -> dict:
        """Counts for every known kind, zeros included, in a stable order."""
        out = {kind: int(self.counts.get(kind, 0)) for kind in self.KINDS}
        for kind in sorted(set(self.counts) - set(self.KINDS)):
            out[kind] = int(self.counts[kind])
        return out

import numpy as np

from ordtox import PatientRecord, TrialDataset

# Dose-escalation ledger used throughout the test suite: 17 patients over 6
# cohorts, step-up dosing, with both a demonstrated non-toxic dose and the
# highest administered dose (plus worst grade there) per patient.
AFM11_ROWS = [
    ("1", "1", 0.7, 2.0, 2),
    ("2", "1", 2.0, 2.0, 0),
    ("3", "2", 6.0, 6.0, 0),
    ("4", "3", 7.0, 20.0, 2),
    ("5", "3", 20.0, 20.0, 0),
    ("6", "3", 20.0, 20.0, 0),
    ("7", "4", 60.0, 60.0, 0),
    ("8", "4", 20.0, 60.0, 1),
    ("9", "4", 60.0, 60.0, 0),
    ("10", "5", 180.0, 180.0, 0),
    ("11", "5", 180.0, 180.0, 0),
    ("12", "5", 60.0, 180.0, 3),
    ("13", "5", 180.0, 180.0, 0),
    ("14", "5", 180.0, 180.0, 0),
    ("15", "6", 400.0, 400.0, 0),
    ("16", "6", 60.0, 130.0, 3),
    ("17", "6", 0.0, 130.0, 5),
]


def make_afm11() -> TrialDataset:
    return TrialDataset(tuple(PatientRecord(*row) for row in AFM11_ROWS))


def node_matrix(samples, prefix: str) -> np.ndarray:
    """Retained draws of all mtd or r nodes as one (draws, nodes) matrix."""
    return np.column_stack([samples.pooled(f"{prefix}[{v.label}]") for v in samples.nodes])


def batch_means_se(chain_draws: np.ndarray, batches_per_chain: int = 20) -> float:
    """Monte Carlo standard error of the grand mean from per-chain batch means."""
    means = []
    for row in np.atleast_2d(chain_draws):
        for chunk in np.array_split(row, batches_per_chain):
            means.append(chunk.mean())
    means = np.asarray(means)
    return float(means.std(ddof=1) / np.sqrt(means.size))

"""Small-budget sumset witnesses in Z_p: exact kernels, searches, constructions and experiments."""

__version__ = "0.1.0"

from .zp import Context, IntervalZp, ProgressionZp, ZpSet, line, modp, set_from_elements  # noqa: E402
from .kernel import popularity_partition, rep_profile, sumset, sumset_size  # noqa: E402
from .witness import find_witness, mc_expected_sumset, witness_frontier  # noqa: E402

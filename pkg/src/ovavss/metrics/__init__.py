from .iou import EvalReport, IouAccumulator, finalize, harmonic_mean  # noqa: F401
from .semantic import assemble_semantic  # noqa: F401
from .tables import AblationRow, append_row, format_row, read_rows  # noqa: F401

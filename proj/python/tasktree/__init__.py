"""Task-tree graph pretraining toolkit.

Thin Python surface over the C++ core: dataset IO and synthesis, encoder
checkpoints, task-tree encoding, pretraining, specialization, and the
evaluation protocols.
"""

try:
    # Installed-wheel layout: the extension lives inside the package.
    from ._tasktree import *  # noqa: F401,F403
    from ._tasktree import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # In-tree layout: the extension sits on sys.path next to the package.
    from _tasktree import *  # noqa: F401,F403

__all__ = [
    "Dataset",
    "EncoderParams",
    "EvalReport",
    "TaskInstance",
    "ValidationError",
    "NumericError",
    "load_dataset",
    "save_dataset",
    "synth",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
    "encode_tasks",
    "pretrain",
    "specialize",
    "finetune",
    "in_context",
    "zero_shot",
    "distribution_gap",
]

"""Backend selection for the tree kernels.

The compiled ``_ctree`` extension is used when importable, unless the
``TFAML_PURE_PYTHON`` environment variable is set to a non-empty value.
Both backends grow identical trees.
"""

import os

from . import _pytree

python_backend = _pytree

try:
    if os.environ.get("TFAML_PURE_PYTHON"):
        raise ImportError("pure-Python backend forced")
    from . import _ctree as compiled_backend
except ImportError:
    compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "cython" if backend is compiled_backend else "python"

build_tree = backend.build_tree
predict_tree = backend.predict_tree

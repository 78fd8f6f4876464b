import sys
from typing import TYPE_CHECKING, Generator, TypeVar, Union

import numpy as np
import numpy.typing as npt

# The `ParamSpec` does not have native support before Python v3.10
if sys.version_info < (3, 10):
    from typing_extensions import ParamSpec
else:
    from typing import ParamSpec

if TYPE_CHECKING:
    from .entities import ApproximationGraph, VertexGraph

P = ParamSpec("P")
T = TypeVar("T")

# Type for PyTest fixtures which yield a fixture themselves
YieldFixture = Generator[T, None, None]

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Any graph an energy form or a harmonic problem can live on
NetworkT = Union["ApproximationGraph", "VertexGraph"]

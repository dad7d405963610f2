"""Exception hierarchy shared by all mosreg modules."""


class MosregError(Exception):
    """Base class for all computational failures raised by this package."""


class DegenerateDivisor(MosregError):
    """The homogeneous divisor w fell below the configured floor; the point
    maps toward infinity."""


class SingularTransform(MosregError):
    """Transform matrix is not invertible (determinant below floor)."""


class ImageTooSmall(MosregError):
    """Image dimensions are below the minimum an operation requires."""


class DimensionMismatch(MosregError):
    """Two rasters that must share dimensions do not."""


class EmptyOverlap(MosregError):
    """No valid pixel in the overlap of the two images."""


class SingularHessian(MosregError):
    """Gauss-Newton normal equations stayed singular after damping retries;
    usually a textureless overlap."""


class DegenerateSamples(MosregError):
    """All sampled intensities identical; density gradient undefined."""


class DisplacementTooLarge(MosregError):
    """A simulated viewpoint change pushes the crop window outside the
    reference texture."""

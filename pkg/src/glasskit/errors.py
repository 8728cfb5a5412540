"""Exception types shared across the toolkit."""


class GlassKitError(Exception):
    """Base class for all toolkit errors."""


class DegenerateGeometry(GlassKitError):
    """Vertex set is rank-deficient (collinear or near-collinear points)."""


class NearOriginPlane(GlassKitError):
    """Least-squares plane fit residual too large: plane passes near the camera origin.

    Carries the RMS residual in ``args[1]`` when raised by fit_plane_lsq.
    """


class InvalidPlane(GlassKitError):
    """Plane normal is zero or non-finite."""


class OutOfRange(GlassKitError):
    """Angular argument outside [-pi/2, pi/2]."""


class RayParallelToPlane(GlassKitError):
    """Pixel ray is (numerically) parallel to the plane."""


class PlaneBehindCamera(GlassKitError):
    """Ray-plane intersection has non-positive depth."""


class EmptyInstance(GlassKitError):
    """Instance mask contains no pixels."""


class ShapeError(GlassKitError):
    """Array shapes do not match."""


class SingularConfiguration(GlassKitError):
    """Gradient requested at a singular loss configuration."""


class EmptyEvaluation(GlassKitError):
    """No valid pixels to evaluate."""


class GenerationFailed(GlassKitError):
    """Scene rejection sampling exhausted its attempt budget."""


class EmptyDataset(GlassKitError):
    """Dataset contains no frames."""

"""Exception hierarchy. Every error carries a stable machine-readable code
so the CLI can map failures to exit diagnostics."""


class PerfracError(Exception):
    code = "ERROR"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        base = super().__str__()
        if self.context:
            extra = ", ".join(f"{k}={v}" for k, v in self.context.items())
            return f"{base} ({extra})"
        return base


class InvalidRadius(PerfracError):
    code = "INVALID_RADIUS"


class MeshDegenerate(PerfracError):
    code = "MESH_DEGENERATE"


class TilingMismatch(PerfracError):
    code = "TILING_MISMATCH"


class MeshMismatch(PerfracError):
    code = "MESH_MISMATCH"


class SingularSystem(PerfracError):
    code = "SINGULAR_SYSTEM"


class NoConvergence(PerfracError):
    code = "NO_CONVERGENCE"


class InfeasibleBounds(PerfracError):
    code = "INFEASIBLE_BOUNDS"


class IdentityViolation(PerfracError):
    code = "IDENTITY_VIOLATION"


class PointOutsideDomain(PerfracError):
    code = "POINT_OUTSIDE_DOMAIN"


class ParseError(PerfracError):
    code = "PARSE_ERROR"


class ValidationError(PerfracError):
    code = "VALIDATION_ERROR"

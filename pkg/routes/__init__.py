from .health import health_bp
from .matching import matching_bp

__all__ = [
    'health_bp',
    'matching_bp'
]

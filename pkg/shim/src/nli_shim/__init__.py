from .service import InferenceBundle, ShimConfig, create_app, main

__all__ = ["InferenceBundle", "ShimConfig", "create_app", "main"]

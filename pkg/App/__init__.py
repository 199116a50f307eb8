"""Stage orchestration, the ablation runner and run manifests."""

__all__ = ["pipeline", "ablation", "manifest"]

"""Observer interface for the forward simulator."""

from abc import ABC, abstractmethod

from .events import JumpEvent, SegmentEvent, StepEvent


class PathObserver(ABC):
    """
    Base class for everything that follows simulated paths as they are built.

    The simulator calls on_start once, then per step any number of
    on_segment / on_jump calls (in time order) and one on_step, and finally
    on_finish with the completed bundle.
    """

    def on_start(self, t: float, x0, n_paths: int):
        """
        Called once before the first step.

        Args:
            t: Start time
            x0: Start state, shape (d,)
            n_paths: Number of paths
        """
        pass

    @abstractmethod
    def on_segment(self, event: SegmentEvent):
        """
        Called after each Euler move.

        Args:
            event: Segment of a group of paths
        """
        pass

    def on_jump(self, event: JumpEvent):
        """Called after impulses are applied to a group of paths."""
        pass

    def on_step(self, event: StepEvent):
        """Called when every path has reached the next step time."""
        pass

    def on_finish(self, bundle):
        """Called with the finished PathBundle."""
        pass

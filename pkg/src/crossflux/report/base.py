"""Base class for rendered text reports."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Union


class Report(ABC):
    """Base class for all text outputs (tables, SVG documents, summaries).

    Rendering is deterministic: identical inputs give identical text.
    """

    def render(self, **kwargs: Any) -> str:
        """Render the report with the given parameters.

        Template method that calls _render_content() and appends get_suffix().

        Args:
            **kwargs: Parameters used by the concrete report

        Returns:
            The rendered text with any suffix appended

        Raises:
            ValueError: If required parameters are missing or invalid
        """
        main_content = self._render_content(**kwargs)
        suffix = self.get_suffix()
        if suffix:
            return f"{main_content}\n{suffix}\n"
        return f"{main_content}\n"

    @abstractmethod
    def _render_content(self, **kwargs: Any) -> str:
        """Render the main content of the report.

        Raises:
            ValueError: If required parameters are missing or invalid
        """
        pass

    def get_suffix(self) -> str:
        """Trailing content such as provenance comments; empty by default."""
        return ""

    def write(self, path: Union[str, Path], **kwargs: Any) -> Path:
        """Render and write to ``path`` with LF line endings.

        Raises:
            OSError: If the file cannot be written
        """
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render(**kwargs))
        return path

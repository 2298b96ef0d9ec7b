"""Report rendered from a string.Template."""

from string import Template
from typing import Any

from .base import Report


class TemplateReport(Report):
    """Report that substitutes $variables into a template string."""

    def __init__(self, template_string: str) -> None:
        """
        Args:
            template_string: Template string with $variable placeholders
        """
        self.template = Template(template_string)

    def _render_content(self, **kwargs: Any) -> str:
        """Substitute ``kwargs`` into the template.

        Raises:
            ValueError: If a template variable is missing
        """
        try:
            return self.template.substitute(**kwargs)
        except KeyError as e:
            missing_var = str(e).strip("'")
            raise ValueError(f"Missing required template variable: {missing_var}") from e


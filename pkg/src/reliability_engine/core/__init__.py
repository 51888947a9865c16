"""Gemeinsame Datenmodelle und Prompt-Vorlagen.

Kontext und Registry liegen in ``core.context`` bzw. ``core.registry`` und
werden direkt importiert, da sie ihrerseits Scoring und die Techniken laden.
"""

from .prompts import PromptLibrary
from .run_models import RunRecord, Task, TaskCategory, TechniqueConfig, TechniqueName

__all__ = ["PromptLibrary", "RunRecord", "Task", "TaskCategory", "TechniqueConfig", "TechniqueName"]

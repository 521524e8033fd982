"""Design block structures from text, build them in a voxel world, and verify they work."""
from .dsl import parse_actions, parse_checks, parse_model, print_model
from .errors import LubanError
from .kernel import assemble, planner_checks
from .render import render, write_image
from .tasks import TASK_IDS, generate_terrain, load_fixture
from .verify import migrate, verify
from .world import WorldSnapshot, find_path, standable

__version__ = "0.1.0"

__all__ = [
    "LubanError", "TASK_IDS", "WorldSnapshot", "assemble", "find_path", "generate_terrain", "load_fixture",
    "migrate", "parse_actions", "parse_checks", "parse_model", "planner_checks", "print_model", "render",
    "standable", "verify", "write_image",
]

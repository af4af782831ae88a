from .db import (
    AccommodationRecord,
    AttractionRecord,
    DbParseError,
    DbValidationError,
    DistanceRecord,
    FlightRecord,
    RestaurantRecord,
    SandboxDb,
    load_db,
    save_db,
    validate_db,
)
from .generate import CUISINES, SCALES, DbScale, generate_db
from .tools import (
    TOOL_ARGS,
    FailureConfig,
    ToolResult,
    call_tool,
    failure_message,
    google_distance,
    parse_observation,
    run_tool,
    search_accommodation,
    search_attraction,
    search_city,
    search_flight,
    search_restaurant,
)

__all__ = [
    "AccommodationRecord",
    "AttractionRecord",
    "CUISINES",
    "DbParseError",
    "DbScale",
    "DbValidationError",
    "DistanceRecord",
    "FailureConfig",
    "FlightRecord",
    "RestaurantRecord",
    "SCALES",
    "SandboxDb",
    "TOOL_ARGS",
    "ToolResult",
    "call_tool",
    "failure_message",
    "generate_db",
    "google_distance",
    "load_db",
    "parse_observation",
    "run_tool",
    "save_db",
    "search_accommodation",
    "search_attraction",
    "search_city",
    "search_flight",
    "search_restaurant",
    "validate_db",
]

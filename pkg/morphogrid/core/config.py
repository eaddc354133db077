from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="MORPHOGRID_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = "INFO"

    # Grid construction
    grid_cells: int = 24
    samples_per_edge: int = 10
    grid_margin: float = 0.1

    # Segment rotation filter (radians)
    rotation_threshold: float = 0.15

    # Rendering
    panel_size: int = 480
    light_stroke: float = 0.75
    heavy_stroke: float = 1.5
    marker_radius: float = 3.0
    baseline_marker_ratio: float = 1.8
    svg_digits: int = 6
    survey_columns: int = 7

    # Generalized Procrustes
    gpa_tolerance: float = 1e-10
    gpa_max_iterations: int = 100

    # Prototype shear / taper / bend
    prototype_parameter: float = 0.25

    # Fan-out for survey and multi-baseline fits
    workers: int = 4


settings = Settings()


DATASET_SCHEMA_VERSION = 1
DEFAULT_GROUP = "all"

# Numerical tolerances
BASELINE_DEGENERACY = 1e-12
COINCIDENT_LANDMARKS = 1e-10
DETERMINANT_FLOOR = 1e-12
VANISHING_LINE = 1e-12
BOUNDARY_TOLERANCE = 1e-12
UNIT_BOX_TOLERANCE = 1e-12
RANK_TOLERANCE = 1e-10
CONDITION_WARNING = 1e8
PRINCIPAL_AXIS_GAP = 1e-9

# Monomial count of the trend-surface basis per degree
TREND_TERMS = {1: 3, 2: 6, 3: 10}

DEFAULT_TRIM = "template"

# Canonical JSON layout accepted by read_dataset
DATASET_JSON_SCHEMA = {
    "type": "object",
    "required": ["schema", "landmarks", "configurations"],
    "properties": {
        "schema": {"type": "integer"},
        "landmarks": {
            "type": "array",
            "items": {"type": "string"},
            "minItems": 3,
        },
        "configurations": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "coords"],
                "properties": {
                    "id": {"type": "string"},
                    "group": {"type": "string"},
                    "unit": {"enum": ["raw", "two-point", "procrustes"]},
                    "coords": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {"type": "number"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
            },
        },
        "metadata": {"type": "object"},
        "provenance": {
            "type": "object",
            "properties": {
                "sources": {"type": "array", "items": {"type": "string"}},
                "ingested_at": {"type": ["string", "null"]},
            },
        },
    },
}

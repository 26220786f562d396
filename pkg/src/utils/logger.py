import json
import os
import uuid
from datetime import datetime
from enum import Enum

# Path of the experiment log
DEFAULT_LOG_FILE = os.path.join("logs", "experiment_data.json")
LOG_FILE_ENV = "ACE_LOG_FILE"

REQUIRED_DETAIL_KEYS = ["parameters", "outcome"]


class ActionType(str, Enum):
    """
    Kinds of actions recorded in the experiment log.
    """
    CONFIG = "CONFIG_VALIDATION"    # Parsing and validating an experiment config
    SIMULATION = "SIMULATION"       # Running replications
    AGGREGATION = "AGGREGATION"     # Turning per-period rows into summaries
    EMISSION = "EMISSION"           # Writing output files
    SWEEP = "SWEEP"                 # Parameter sweeps


def log_file_path() -> str:
    return os.getenv(LOG_FILE_ENV) or DEFAULT_LOG_FILE


def log_experiment(component: str, study: str, action: ActionType, details: dict, status: str):
    """
    Records one engine action for later analysis.

    Args:
        component (str): Engine part that acted (e.g. "Harness", "Sweep").
        study (str): Study label (e.g. "org-search").
        action (ActionType): The kind of action (use the ActionType enum).
        details (dict): Details of the action. MUST contain 'parameters' and 'outcome'.
        status (str): "SUCCESS" or "FAILURE".

    Raises:
        ValueError: If required keys are missing from 'details' or the action is invalid.
    """

    # --- 1. ACTION TYPE ---
    # Accepts the enum member or its string value
    valid_actions = [a.value for a in ActionType]
    if isinstance(action, ActionType):
        action_str = action.value
    elif action in valid_actions:
        action_str = action
    else:
        raise ValueError(f"❌ Invalid action: '{action}'. Use the ActionType enum (e.g. ActionType.SIMULATION).")

    # --- 2. REQUIRED DETAILS ---
    missing_keys = [key for key in REQUIRED_DETAIL_KEYS if key not in details]
    if missing_keys:
        raise ValueError(
            f"❌ Logging error (component: {component}): "
            f"fields {missing_keys} are missing from 'details'."
        )

    # --- 3. ENTRY ---
    log_file = log_file_path()
    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)

    entry = {
        "id": str(uuid.uuid4()),  # unique id so merged logs never collide
        "timestamp": datetime.now().isoformat(),
        "component": component,
        "study": study,
        "action": action_str,
        "details": details,
        "status": status,
    }

    # --- 4. READ & WRITE ---
    data = []
    if os.path.exists(log_file):
        try:
            with open(log_file, "r", encoding="utf-8") as f:
                content = f.read().strip()
                if content:
                    data = json.loads(content)
        except json.JSONDecodeError:
            print(f"⚠️ Warning: log file {log_file} was corrupted. A new list was started.")
            data = []

    data.append(entry)

    with open(log_file, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=4, ensure_ascii=False, default=str)
    return entry

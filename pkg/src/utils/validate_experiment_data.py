import json
import os
import sys

from src.utils.logger import REQUIRED_DETAIL_KEYS, ActionType, log_file_path

REQUIRED_FIELDS = [
    "id",
    "timestamp",
    "component",
    "study",
    "action",
    "details",
    "status"
]

# Engine parts allowed to write log entries
VALID_COMPONENTS = ["Harness", "Sweep", "CLI"]
VALID_STATUSES = ["SUCCESS", "FAILURE"]


def validate_entries(data) -> list[str]:
    """Returns every problem found in a loaded log; empty when valid."""
    if not isinstance(data, list) or len(data) == 0:
        return ["experiment log must be a non-empty list."]

    valid_actions = [a.value for a in ActionType]
    problems = []
    for index, entry in enumerate(data):
        if not isinstance(entry, dict):
            problems.append(f"Entry #{index} is not a JSON object.")
            continue

        missing = [field for field in REQUIRED_FIELDS if field not in entry]
        if missing:
            problems.extend(f"Missing field '{field}' in entry #{index}." for field in missing)
            continue

        if entry["component"] not in VALID_COMPONENTS:
            problems.append(f"Invalid component '{entry['component']}' in entry #{index}.")

        if entry["action"] not in valid_actions:
            problems.append(f"Invalid action '{entry['action']}' in entry #{index}.")

        if entry["status"] not in VALID_STATUSES:
            problems.append(f"Invalid status '{entry['status']}' in entry #{index}.")

        if not isinstance(entry["details"], dict):
            problems.append(f"'details' must be an object in entry #{index}.")
            continue

        for detail_field in REQUIRED_DETAIL_KEYS:
            if detail_field not in entry["details"]:
                problems.append(f"Missing '{detail_field}' in details of entry #{index}.")
    return problems


def validate_file(path: str | None = None) -> list[str]:
    path = path or log_file_path()
    if not os.path.exists(path):
        return [f"{path} does not exist."]
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError:
            return [f"{path} is not valid JSON."]
    return validate_entries(data)


def validate():
    problems = validate_file()
    for problem in problems:
        print(f"❌ Validation Error: {problem}")
    if problems:
        sys.exit(1)
    print("✅ experiment log validation SUCCESS.")
    sys.exit(0)


if __name__ == "__main__":
    validate()

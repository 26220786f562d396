import importlib
import os
import sys

PYTHON_VERSION_MAJOR = 3
PYTHON_VERSION_MINOR = [10, 11]
ENV_FILE = ".env"
LOGS_DIR = "logs"
REQUIRED_PACKAGES = ["numpy", "pandas", "yaml", "langgraph", "dotenv", "colorama", "pytest"]


def missing_packages(packages=REQUIRED_PACKAGES) -> list[str]:
    missing = []
    for name in packages:
        try:
            importlib.import_module(name)
        except ImportError:
            missing.append(name)
    return missing


def check_environment() -> bool:
    """
    Performs a sanity check on the environment to ensure it is set up correctly.
    """
    print("Starting 'Sanity Check'...\n")
    all_good = True

    # 1. Python version
    version = sys.version_info
    if (version.major == PYTHON_VERSION_MAJOR) and (version.minor in PYTHON_VERSION_MINOR):
        print(f"Python Version: {version.major}.{version.minor}")
    else:
        print(f"Python Version: {version.major}.{version.minor} (Required: 3.10 or 3.11)")
        all_good = False

    # 2. Dependencies
    missing = missing_packages()
    if missing:
        print(f"Missing packages: {', '.join(missing)} (run: pip install -r requirements.txt)")
        all_good = False
    else:
        print("All dependencies importable.")

    # 3. Environment file (optional: only overrides output and log paths)
    if os.path.exists(ENV_FILE):
        print("Environment file detected.")
    else:
        print("No environment file (optional, see .env.example).")

    # 4. Logs
    try:
        if not os.path.exists(LOGS_DIR):
            os.makedirs(LOGS_DIR)
            print("Logs directory created.")
    except OSError as e:
        print(f"An OS error occurred: {e}")
        all_good = False

    if all_good:
        print("\nAll set! You can start.")
    else:
        print("\nFix the errors before continuing.")
    return all_good


if __name__ == "__main__":
    sys.exit(0 if check_environment() else 1)

import os

PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))


def get_resource_path(relative_path):
    """Absolute path of a resource shipped inside the polaron_qhm package."""
    path = os.path.join(PACKAGE_DIR, relative_path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"Packaged resource not found: {relative_path}")
    return path


# Copyright (c) 2025 AMD

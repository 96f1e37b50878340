import json
import os
import tempfile


def write_text(path, text):
    """Write text atomically (temp file in the target dir + rename)."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, data):
    """Write compact JSON atomically."""
    write_text(path, json.dumps(data, separators=(",", ":")) + "\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)

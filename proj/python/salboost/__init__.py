import json as _json

from ._salboost import *  # noqa: F401,F403
from ._salboost import run_benchmark as _run_benchmark


def run_benchmark(config=None):
    text = config if isinstance(config, str) else _json.dumps(config or {})
    return _json.loads(_run_benchmark(text))

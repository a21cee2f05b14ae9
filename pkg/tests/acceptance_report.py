"""Collects one verdict line per acceptance criterion for the run summary."""

RESULTS: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> str:
    RESULTS[number] = (ok, detail)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    return line

"""Collects one pass/fail line per acceptance criterion."""

RESULTS: dict[int, str] = {}


def report(n: int, checks: list[tuple[str, bool]]) -> bool:
    ok = all(flag for _, flag in checks)
    failed = [name for name, flag in checks if not flag]
    detail = "; ".join(name for name, _ in checks)
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    if failed:
        line += f"  [failed: {'; '.join(failed)}]"
    RESULTS[n] = line
    print(line)
    return ok

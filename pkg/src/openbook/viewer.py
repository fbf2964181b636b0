from typing import Any, Dict, List

PASS, FAIL = "PASS", "FAIL"


def _mark(passed: bool) -> str:
    return PASS if passed else FAIL


def _section_lines(section: Any) -> List[str]:
    """Child lines of one report section (without the section header)."""
    if isinstance(section, dict) and "checks" in section:
        return [f"[{_mark(c['passed'])}] {c['name']} (margin {c['margin']})" for c in section["checks"]]
    if isinstance(section, dict):
        return [f"{key}: {value}" for key, value in sorted(section.items()) if not isinstance(value, (dict, list))]
    return []


def _draw(entries: List[Dict[str, Any]], lines: List[str], prefix: str = "") -> None:
    """Append ``entries`` (each ``{"label", "children"}``) to ``lines`` as an ASCII tree."""
    for i, entry in enumerate(entries):
        is_last = i == len(entries) - 1
        branch = "└" if is_last else "├"
        lines.append(f"{prefix}{branch}─ {entry['label']}")
        children = [{"label": child, "children": []} for child in entry.get("children", [])]
        _draw(children, lines, prefix + ("   " if is_last else "│  "))


def render_summary(report: Dict[str, Any]) -> str:
    """Render a run report as an ASCII tree.

    Args:
        report (Dict[str, Any]): A report as produced by ``RunReport.to_dict``.

    Returns:
        str: A header with the run name and overall status followed by one branch per
        computed section.

    Examples:
    - Render a small report
        ```python

        >>> report = {
        ...     'name': 'demo', 'passed': True, 'stage': 'verify',
        ...     'profile': {'passed': True, 'checks': [{'name': 'D > 0', 'passed': True, 'margin': 0.1}]},
        ...     'shs': {}, 'indices': [], 'checks': [],
        ... }
        >>> out = render_summary(report)
        >>> out.splitlines()[0]
        'Run demo [verify]: PASS'
        >>> '└─ [PASS] D > 0 (margin 0.1)' in out
        True

        ```
    """
    entries: List[Dict[str, Any]] = []
    if report.get("profile"):
        entries.append({"label": f"profile: {_mark(report['profile']['passed'])}", "children": _section_lines(report["profile"])})
    for key, shs in sorted(report.get("shs", {}).items()):
        entries.append({"label": f"shs {key}: {_mark(shs['passed'])}", "children": _section_lines(shs)})
    if report.get("small_periods"):
        sp = report["small_periods"]
        entries.append({"label": f"small periods: {_mark(sp['passed'])}", "children": _section_lines(sp)})
    for key in ("asymptotics", "residuals", "energy"):
        if report.get(key):
            entries.append({"label": key, "children": _section_lines(report[key])})
    if report.get("indices"):
        rows = [
            f"binding {r['binding']} cover {r['cover']}: mu_CZ = {r['mu_cz']}"
            + (f" (oracle {r['oracle']})" if r.get("oracle") is not None else "")
            for r in report["indices"]
        ]
        entries.append({"label": "indices", "children": rows})
    if report.get("topology"):
        top = report["topology"]
        entries.append(
            {
                "label": "page curve",
                "children": [
                    f"genus {top['genus']}, punctures {top['punctures']}, c1 {top['c1']}",
                    f"ind = {report.get('fredholm_index')}",
                ],
            }
        )
    if report.get("foliation"):
        fol = report["foliation"]
        entries.append({"label": f"foliation: {_mark(fol['passed'])}", "children": _section_lines(fol)})
    if report.get("checks"):
        entries.append({"label": "run checks", "children": _section_lines({"checks": report["checks"]})})
    if report.get("artifacts"):
        entries.append(
            {"label": "artifacts", "children": [f"{name} sha256:{digest[:12]}" for name, digest in sorted(report["artifacts"].items())]}
        )

    lines: List[str] = []
    _draw(entries, lines)
    header = f"Run {report.get('name', '?')} [{report.get('stage', '?')}]: {_mark(report.get('passed', False))}\n"
    return header + "\n".join(lines)

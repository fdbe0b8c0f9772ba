"""Static analysis, supply-chain checks, and trust management for agent
skill packages.

The native core does the work; this package turns its canonical JSON into
plain Python objects. All paths may be ``str`` or ``os.PathLike``.
"""

from __future__ import annotations

import json as _json
import os as _os
from typing import Any, Dict, List, Optional, Union

from . import _core

__version__ = _core.version()

DEFAULT_LOCKFILE_NAME = _core.DEFAULT_LOCKFILE_NAME
DEFAULT_BASELINE_NAME = _core.DEFAULT_BASELINE_NAME

_PathLike = Union[str, _os.PathLike]

__all__ = [
    "DEFAULT_BASELINE_NAME",
    "DEFAULT_LOCKFILE_NAME",
    "approve",
    "default_policy",
    "edit_distance",
    "monitor_baseline",
    "monitor_check",
    "rules",
    "scan",
    "scan_text",
    "verify",
    "__version__",
]


def _policy_arg(policy: Optional[Union[Dict[str, Any], str]]) -> str:
    if policy is None:
        return ""
    if isinstance(policy, str):
        return policy
    return _json.dumps(policy)


def scan(
    package_dir: _PathLike,
    *,
    index: Optional[_PathLike] = None,
    publisher: Optional[str] = None,
    lockfile: Optional[_PathLike] = None,
    registry_fixture: Optional[_PathLike] = None,
    policy: Optional[Union[Dict[str, Any], str]] = None,
) -> Dict[str, Any]:
    """Scan a skill package directory and return the report as a dict.

    ``index`` points at a JSON-lines marketplace index for lookalike-name
    checks, ``publisher`` names the candidate publisher, ``lockfile``
    enables approved-state comparison, and ``registry_fixture`` supplies a
    known-package list so dependency existence checks run without network
    access. ``policy`` is a policy document (dict or JSON string); omitted
    keys keep their defaults.
    """
    return _json.loads(
        _core.scan_json(
            _os.fspath(package_dir),
            index_path=_os.fspath(index) if index is not None else "",
            publisher=publisher or "",
            lockfile_path=_os.fspath(lockfile) if lockfile is not None else "",
            registry_fixture=(
                _os.fspath(registry_fixture)
                if registry_fixture is not None
                else ""
            ),
            policy_json=_policy_arg(policy),
            fmt="json",
        )
    )


def scan_text(
    package_dir: _PathLike,
    *,
    index: Optional[_PathLike] = None,
    publisher: Optional[str] = None,
    lockfile: Optional[_PathLike] = None,
    registry_fixture: Optional[_PathLike] = None,
    policy: Optional[Union[Dict[str, Any], str]] = None,
) -> str:
    """Scan a skill package directory and return the human-readable report."""
    return _core.scan_json(
        _os.fspath(package_dir),
        index_path=_os.fspath(index) if index is not None else "",
        publisher=publisher or "",
        lockfile_path=_os.fspath(lockfile) if lockfile is not None else "",
        registry_fixture=(
            _os.fspath(registry_fixture) if registry_fixture is not None else ""
        ),
        policy_json=_policy_arg(policy),
        fmt="text",
    )


def approve(
    package_dir: _PathLike,
    lockfile: _PathLike,
    *,
    note: str = "",
) -> str:
    """Record the package's content digests in a trust lockfile.

    Creates or updates ``lockfile`` and returns the approved record name.
    Fails when the package declares a capability manifest that does not
    parse — a broken declaration must not be silently approved.
    """
    return _core.approve(
        _os.fspath(package_dir), _os.fspath(lockfile), note=note
    )


def verify(
    package_dir: _PathLike,
    lockfile: _PathLike,
    *,
    policy: Optional[Union[Dict[str, Any], str]] = None,
) -> Dict[str, Any]:
    """Compare a package directory against its approved digests.

    Returns a dict with ``status`` ("trusted", "modified" or "unknown"),
    the record ``name``, and — when content changed — the file-level
    ``diff``, whether ``reapproval_required``, and the ``reasons``.
    """
    return _json.loads(
        _core.verify_json(
            _os.fspath(package_dir),
            _os.fspath(lockfile),
            policy_json=_policy_arg(policy),
        )
    )


def monitor_baseline(
    root: _PathLike,
    baseline: _PathLike,
    *,
    policy: Optional[Union[Dict[str, Any], str]] = None,
) -> int:
    """Snapshot watched agent files under ``root`` into ``baseline``.

    Returns the number of entries recorded (absent watched files are
    recorded too, so their later creation is detectable).
    """
    return _core.monitor_baseline(
        _os.fspath(root), _os.fspath(baseline), policy_json=_policy_arg(policy)
    )


def monitor_check(
    root: _PathLike,
    baseline: _PathLike,
    *,
    policy: Optional[Union[Dict[str, Any], str]] = None,
) -> Dict[str, Any]:
    """Compare watched files under ``root`` against a baseline snapshot.

    Returns a report dict in the same schema as :func:`scan`; its
    ``findings`` list is empty when nothing watched has changed.
    """
    return _json.loads(
        _core.monitor_check_json(
            _os.fspath(root),
            _os.fspath(baseline),
            policy_json=_policy_arg(policy),
            fmt="json",
        )
    )


def rules(
    *, policy: Optional[Union[Dict[str, Any], str]] = None
) -> List[Dict[str, Any]]:
    """The rule catalog: one entry per detection rule, with its scenario
    id, severity, targets, and documentation."""
    catalog = _json.loads(_core.rules_json(policy_json=_policy_arg(policy)))
    return catalog["rules"]


def default_policy() -> Dict[str, Any]:
    """The built-in policy document as a dict."""
    return _json.loads(_core.default_policy_json())


def edit_distance(a: str, b: str) -> int:
    """Byte-level Levenshtein distance between two package names."""
    return _core.edit_distance(a, b)

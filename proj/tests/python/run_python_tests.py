"""Stages the package next to the built extension and runs pytest on it."""

import argparse
import os
import shutil
import subprocess
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", required=True, help="python/prefalign source dir")
    ap.add_argument("--module", required=True, help="built _core extension")
    ap.add_argument("--workdir", required=True)
    args = ap.parse_args()

    site = os.path.join(args.workdir, "site")
    pkg = os.path.join(site, "prefalign")
    shutil.rmtree(site, ignore_errors=True)
    shutil.copytree(args.package, pkg, ignore=shutil.ignore_patterns("__pycache__"))
    shutil.copy2(args.module, pkg)

    env = dict(os.environ)
    env["PYTHONPATH"] = site + os.pathsep + env.get("PYTHONPATH", "")
    env["PREFALIGN_TEST_WORKDIR"] = os.path.abspath(args.workdir)
    here = os.path.dirname(os.path.abspath(__file__))
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", here]
    return subprocess.call(cmd, env=env, cwd=args.workdir)


if __name__ == "__main__":
    sys.exit(main())

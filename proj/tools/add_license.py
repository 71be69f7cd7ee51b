#!/usr/bin/env python3
"""Prepends the Apache-2.0 header to first-party sources. Idempotent."""

import pathlib
import sys

HEADER = """Copyright 2026 The PVH Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License."""

DIRS = ["include", "src", "tools", "tests", "bench", "cmake"]
C_STYLE = {".cpp", ".hpp", ".h", ".cc"}
HASH_STYLE = {".cmake", ".py"}


def commented(prefix):
    return "\n".join((prefix + " " + line).rstrip() for line in HEADER.splitlines()) + "\n"


def targets(root):
    yield root / "CMakeLists.txt"
    for d in DIRS:
        for p in sorted((root / d).rglob("*")):
            if p.is_file() and (p.suffix in C_STYLE | HASH_STYLE or p.name == "CMakeLists.txt"):
                yield p


def main():
    root = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".").resolve()
    changed = 0
    for p in targets(root):
        text = p.read_text()
        if "Licensed under the Apache License" in text[:1024]:
            continue
        block = commented("//" if p.suffix in C_STYLE else "#")
        if text.startswith("#!"):
            shebang, _, rest = text.partition("\n")
            text = shebang + "\n" + block + "\n" + rest
        else:
            text = block + "\n" + text
        p.write_text(text)
        changed += 1
    print(f"headers added to {changed} files")


if __name__ == "__main__":
    main()

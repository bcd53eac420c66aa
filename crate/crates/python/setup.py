"""Builds the Rust extension with plain setuptools.

setuptools-rust is the usual tool for this, but the build stays dependency
free by shelling out to cargo directly: compile the cdylib in release mode,
then copy it to wherever setuptools expects the extension module.
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

CRATE_DIR = Path(__file__).resolve().parent

DYLIB_NAME = {
    "linux": "libfrictions.so",
    "darwin": "libfrictions.dylib",
    "win32": "frictions.dll",
}


class CargoExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        if not isinstance(ext, CargoExtension):
            return super().build_extension(ext)
        subprocess.run(
            [
                "cargo",
                "build",
                "--release",
                "--manifest-path",
                str(CRATE_DIR / "Cargo.toml"),
            ],
            check=True,
        )
        metadata = json.loads(
            subprocess.run(
                ["cargo", "metadata", "--format-version", "1", "--no-deps"],
                cwd=CRATE_DIR,
                check=True,
                capture_output=True,
            ).stdout
        )
        for platform, dylib in DYLIB_NAME.items():
            if sys.platform.startswith(platform):
                break
        else:
            raise RuntimeError(f"unsupported platform: {sys.platform}")
        artifact = Path(metadata["target_directory"]) / "release" / dylib
        destination = Path(self.get_ext_fullpath(ext.name))
        destination.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(artifact, destination)


setup(
    ext_modules=[CargoExtension("frictions")],
    cmdclass={"build_ext": CargoBuildExt},
)

"""CMake-backed build of the mamreg python package.

The extension and the pure-python shim both come out of the CMake tree; this
file only teaches setuptools to drive cmake (install with
`pip install . --no-build-isolation`).
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        # fullpath is <build_lib>/mamreg/_core.<abi>.so; cmake drops the
        # extension straight into that package directory.
        package_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        package_dir.mkdir(parents=True, exist_ok=True)
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        cfg = "Debug" if self.debug else "Release"
        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={package_dir}",
            f"-DPython3_EXECUTABLE={sys.executable}",
            "-DMAMREG_BUILD_TESTS=OFF",
            "-DMAMREG_BUILD_CLI=OFF",
            "-DMAMREG_BUILD_PYTHON=ON",
        ]
        source_dir = Path(__file__).resolve().parent
        subprocess.run(["cmake", str(source_dir), *cmake_args], cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", f"-j{os.cpu_count() or 2}"],
            cwd=build_dir,
            check=True,
        )
        (package_dir / "__init__.py").write_bytes(
            (source_dir / "python" / "mamreg" / "__init__.py").read_bytes()
        )


setup(
    ext_modules=[CMakeExtension("mamreg._core")],
    cmdclass={"build_ext": CMakeBuild},
)

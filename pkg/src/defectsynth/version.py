from pathlib import Path
import subprocess
import platform
import sys

VERSION = "0.1.0"

# Seeded runs are only bit-reproducible on the same numeric stack.
NUMERIC_PACKAGES = ["numpy", "scipy", "pillow", "pydantic"]


def git_commit(repo_dir: Path) -> str:
    """Short SHA-1 of HEAD, `unknown` outside a git checkout or without git."""
    if not (repo_dir / ".git").exists():
        return "unknown"
    try:
        output = subprocess.check_output(["git", "rev-parse", "--short", "HEAD"], cwd=repo_dir)
    except (OSError, subprocess.CalledProcessError):
        return "unknown"
    return output.decode("utf-8").strip()


def package_versions(names: list[str]) -> list[str]:
    import importlib_metadata

    versions = []
    for name in names:
        try:
            versions.append(f"{name}-{importlib_metadata.version(name)}")
        except importlib_metadata.PackageNotFoundError:
            versions.append(f"{name}-missing")
    return versions


def version_summary() -> str:
    """Returns complete version summary."""
    summary = {
        "defectsynth version": VERSION,
        "numeric stack": " ".join(package_versions(NUMERIC_PACKAGES)),
        "platform": platform.platform(),
        "commit": git_commit(Path(__file__).parents[2]),
        "python_version": sys.version,
        "install_path": Path(__file__).resolve().parent,
    }
    return "\n".join(
        "{:>30} {}".format(k + ":", str(v).replace("\n", " ")) for k, v in summary.items()
    )

"""Bundle project assets into a single archive."""
import os
import zipfile


def collect_assets(root):
    found = []
    for dirpath, _dirs, files in os.walk(root):
        for name in files:
            found.append(os.path.join(dirpath, name))
    return sorted(found)


def pack(root, archive_path):
    with zipfile.ZipFile(archive_path, "w") as archive:
        for path in collect_assets(root):
            archive.write(path, os.path.relpath(path, root))

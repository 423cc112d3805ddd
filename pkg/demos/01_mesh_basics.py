"""Mesh toolkit tour: templates, subdivision, symmetry, OBJ round trips.

Run:  python3 demos/01_mesh_basics.py
"""

import os
import tempfile

from avatarkit import (
    body_template,
    full_template,
    load_mesh,
    mirror_correspondence,
    save_mesh,
    subdivide_1to4,
)
from avatarkit.mesh import save_tags


def main():
    body = full_template()
    print(f"full-resolution template: {body.n_vertices} vertices, {body.n_faces} faces")

    fine = subdivide_1to4(body)
    print(f"after 1:4 subdivision:    {fine.n_vertices} vertices, {fine.n_faces} faces")
    print("(each edge contributes one midpoint vertex: V' = V + E)")

    sym = mirror_correspondence(body, "x")
    print(
        f"left/right symmetry: {len(sym.pairs)} mirrored pairs, "
        f"{len(sym.fixed)} vertices on the symmetry plane"
    )

    small = body_template()  # low-resolution variant used by the test harness
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "template.obj")
        tags_path = os.path.join(tmp, "template.tags.json")
        save_mesh(path, small)
        save_tags(tags_path, small.tags)
        back = load_mesh(path, tags_path=tags_path)
        print(
            f"OBJ round trip: {back.n_vertices} vertices, tags preserved: "
            f"{sorted(back.tags)}"
        )


if __name__ == "__main__":
    main()

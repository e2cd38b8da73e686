#!/usr/bin/env python3
"""Smoke test for the coefid_py extension module.

Build the module first:

    cargo build --release -p coefid-py

The script locates the compiled cdylib under target/, stages it as
`coefid_py.so` in a temporary directory and exercises the Python API:
mesh generation, direct runs, identification by all five methods, and the
degenerate-observation failure mode.
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def stage_module() -> pathlib.Path:
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libcoefid_py.so", "libcoefid_py.dylib", "coefid_py.dll")
    ]
    for candidate in candidates:
        if candidate.exists():
            stage = pathlib.Path(tempfile.mkdtemp(prefix="coefid_py_"))
            shutil.copy2(candidate, stage / "coefid_py.so")
            return stage
    sys.exit(
        "coefid_py cdylib not found; run `cargo build --release -p coefid-py` first"
    )


sys.path.insert(0, str(stage_module()))

import coefid_py  # noqa: E402

PASSED = 0


def check(label: str, condition: bool, detail: str = "") -> None:
    global PASSED
    if not condition:
        sys.exit(f"FAIL: {label} {detail}")
    PASSED += 1
    print(f"PASS: {label}")


def main() -> None:
    trapezoid = [(0.0, 0.0), (1.5, 0.0), (1.5, 0.5), (0.0, 1.0)]
    mesh = coefid_py.Mesh.triangulate(trapezoid, 0.08)
    check(
        "trapezoid mesh is valid",
        mesh.validate() == [] and mesh.min_angle_deg() >= 20.0,
        f"violations={mesh.validate()[:3]}",
    )
    check(
        "trapezoid area conserved",
        abs(mesh.total_area() - 1.125) < 1e-12,
        f"area={mesh.total_area()}",
    )
    check(
        "mesh accessors are consistent",
        len(mesh.nodes()) == mesh.num_nodes
        and len(mesh.triangles()) == mesh.num_triangles
        and len(mesh.boundary_edges()) == mesh.num_boundary_edges,
    )

    with tempfile.TemporaryDirectory() as tmp:
        path = str(pathlib.Path(tmp) / "mesh.txt")
        mesh.save(path)
        reloaded = coefid_py.Mesh.load(path)
        check(
            "mesh text round trip",
            reloaded.num_nodes == mesh.num_nodes
            and reloaded.num_triangles == mesh.num_triangles,
        )

    # Insulated constant state: with a zero coefficient nothing moves.
    square = coefid_py.Mesh.triangulate(
        [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], 0.3
    )
    times, phi = coefid_py.direct_observations(
        square, "zero", 0.1, 50, boundary_coeff=0.0
    )
    check(
        "coefficient-free insulated run stays at 1",
        max(abs(v - 1.0) for v in phi) < 1e-9,
    )
    check("time grid is uniform", abs(times[1] - times[0] - 0.002) < 1e-15)

    # Identification round trip with a custom (callable) coefficient.
    T, n = 0.1, 200
    p_exact = lambda t: 1000.0 * t / (1.0 + 500.0 * t * t)  # noqa: E731
    times, phi = coefid_py.direct_observations(mesh, p_exact, T, n)
    check("observed series decays from 1", abs(phi[0] - 1.0) < 1e-6 and phi[-1] < phi[0])

    for scheme in ("first_order", "crank_nicolson", "hybrid_implicit", "transform", "nonlinear"):
        result = coefid_py.identify(mesh, phi, T, scheme=scheme, p0=0.0)
        errs = [
            abs(result.p[i] - p_exact(result.times[i]))
            for i in range(len(result.p))
            if result.times[i] >= 0.2 * T
        ]
        check(
            f"{scheme} recovers the smooth coefficient",
            max(errs) < 2.5,
            f"max late-window error {max(errs):.3f}",
        )

    result = coefid_py.identify(mesh, phi, T, n_steps=100)
    check(
        "identification on a coarser grid matches observations",
        len(result.p) == 100
        and max(abs(result.observed[i] - phi[2 * i]) for i in range(101)) < 1e-9,
    )
    check(
        "recovery denominators are negative for decaying data",
        all(w < 0.0 for w in result.w_functional),
    )

    noisy_a = coefid_py.direct_observations(mesh, "eq20", T, 100, noise_level=0.01, seed=3)[1]
    noisy_b = coefid_py.direct_observations(mesh, "eq20", T, 100, noise_level=0.01, seed=3)[1]
    check("seeded noise is reproducible", noisy_a == noisy_b)

    try:
        coefid_py.identify(square, [0.0] * 11, T, initial=0.0)
        sys.exit("FAIL: degenerate observation should raise")
    except RuntimeError as e:
        check("degenerate observation raises RuntimeError", "degenerate" in str(e))

    try:
        coefid_py.Mesh.triangulate([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 0.5)
        sys.exit("FAIL: degenerate polygon should raise")
    except ValueError:
        check("degenerate polygon raises ValueError", True)

    mean_result = coefid_py.identify(
        mesh, coefid_py.direct_observations(mesh, p_exact, T, n, observation="mean")[1],
        T, observation="mean",
    )
    check(
        "mean-value observation identifies too",
        max(abs(mean_result.p[i] - p_exact(mean_result.times[i]))
            for i in range(len(mean_result.p))
            if mean_result.times[i] >= 0.2 * T) < 2.5,
    )

    print(f"\nall {PASSED} smoke checks passed (coefid_py {coefid_py.__version__})")


if __name__ == "__main__":
    main()

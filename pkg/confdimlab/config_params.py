import os
from typing import Optional


# Namespace the global variables
class _ConfigParams:
    # Location of the binary graph cache
    cache_dir: str = os.path.join(os.path.expanduser("~"), ".cache", "confdimlab")

    # Largest graph `build_graph` agrees to construct
    cell_cap: int = 10_000_000

    # Constraint generation parameters of the modulus solver
    max_iter: int = 10_000
    paths_per_iteration: int = 16
    modulus_tol: float = 1e-9

    # Diameter cap factor L of ball-to-ball families
    loewner_cap: float = 6.0

    # Largest annulus radius, as a fraction of the graph diameter
    annulus_radius_fraction: float = 0.25

    # Number of annulus centers averaged by the scaling fits
    annulus_centers: int = 5

    # Reference walk dimension of the default conductances, `None` means d_H
    beta_ref: Optional[float] = None

    # Gradient norm at which the p-harmonic solver stops
    harmonic_tol: float = 1e-10

    # Number of worker processes for batch runs
    workers: int = os.cpu_count() or 1

    def __init__(self) -> None:
        # Overwrite any of the parameters if environment variables are set
        self.cache_dir = os.environ.get("CONFDIMLAB_CACHE_DIR") or self.cache_dir

        env_cell_cap = os.environ.get("CONFDIMLAB_CELL_CAP")
        if env_cell_cap is not None:
            self.cell_cap = int(env_cell_cap)

        env_max_iter = os.environ.get("CONFDIMLAB_MAX_ITER")
        if env_max_iter is not None:
            self.max_iter = int(env_max_iter)

        env_paths = os.environ.get("CONFDIMLAB_PATHS_PER_ITERATION")
        if env_paths is not None:
            self.paths_per_iteration = int(env_paths)

        env_modulus_tol = os.environ.get("CONFDIMLAB_MODULUS_TOL")
        if env_modulus_tol is not None:
            self.modulus_tol = float(env_modulus_tol)

        env_loewner_cap = os.environ.get("CONFDIMLAB_LOEWNER_CAP")
        if env_loewner_cap is not None:
            self.loewner_cap = float(env_loewner_cap)

        env_fraction = os.environ.get("CONFDIMLAB_ANNULUS_RADIUS_FRACTION")
        if env_fraction is not None:
            self.annulus_radius_fraction = float(env_fraction)

        env_centers = os.environ.get("CONFDIMLAB_ANNULUS_CENTERS")
        if env_centers is not None:
            self.annulus_centers = int(env_centers)

        env_beta_ref = os.environ.get("CONFDIMLAB_BETA_REF")
        if env_beta_ref is not None:
            self.beta_ref = float(env_beta_ref)

        env_harmonic_tol = os.environ.get("CONFDIMLAB_HARMONIC_TOL")
        if env_harmonic_tol is not None:
            self.harmonic_tol = float(env_harmonic_tol)

        env_workers = os.environ.get("CONFDIMLAB_WORKERS")
        if env_workers is not None:
            self.workers = max(1, int(env_workers))


ConfigParams = _ConfigParams()

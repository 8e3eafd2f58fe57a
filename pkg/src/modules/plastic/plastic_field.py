import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence, Union

import numpy as np

from src.modules.errors import DimensionMismatch, ParseError

if TYPE_CHECKING:
    from src.modules.elasticity.assembly import ElementPrecomp
    from src.modules.elasticity.material import MaterialParams

logger = logging.getLogger(__name__)

PLASTIC_MAGIC = "plastic"
PLASTIC_VERSION = "1"

# Storage order of the 6 symmetric coefficients: [a00, a01, a02, a11, a12, a22].
COEFF_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))

# Derivative of the expanded matrix with respect to each stored coefficient.
SYM_BASIS: np.ndarray = np.zeros((6, 3, 3))
for _c, (_i, _j) in enumerate(COEFF_INDEX):
    SYM_BASIS[_c, _i, _j] = 1.0
    SYM_BASIS[_c, _j, _i] = 1.0

DEFAULT_SIGMA_MIN: float = 0.05
DEFAULT_SIGMA_MAX: float = 20.0


@dataclass(frozen=True, eq=False)
class PlasticField:
    """
    Per-element symmetric plastic strain, stored as Z rows of 6 coefficients.

    Attributes:
        coeffs (np.ndarray): (Z, 6) coefficients [a00, a01, a02, a11, a12, a22].
    """

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim == 1:
            if coeffs.size % 6:
                raise DimensionMismatch(f"Plastic field length {coeffs.size} is not a multiple of 6.")
            coeffs = coeffs.reshape(-1, 6)
        if coeffs.ndim != 2 or coeffs.shape[1] != 6 or coeffs.shape[0] < 1:
            raise DimensionMismatch(f"Plastic field must have shape (Z, 6), got {coeffs.shape}.")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("Plastic field contains non-finite coefficients.")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_elements(self) -> int:
        return int(self.coeffs.shape[0])

    def flat(self) -> np.ndarray:
        """6Z vector, element-major (index 6e + c)."""
        return self.coeffs.reshape(-1).copy()

    @classmethod
    def from_flat(cls, values: Union[np.ndarray, Sequence[float]]) -> "PlasticField":
        return cls(coeffs=np.asarray(values, dtype=np.float64).reshape(-1, 6))

    def expand(self) -> np.ndarray:
        """(Z, 3, 3) symmetric matrices."""
        return np.einsum("zc,cij->zij", self.coeffs, SYM_BASIS)

    @classmethod
    def from_matrices(cls, matrices: np.ndarray) -> "PlasticField":
        """Builds a field from (Z, 3, 3) matrices, averaging the off-diagonal pairs."""
        m = np.asarray(matrices, dtype=np.float64).reshape(-1, 3, 3)
        sym = 0.5 * (m + np.transpose(m, (0, 2, 1)))
        return cls(coeffs=np.stack([sym[:, i, j] for i, j in COEFF_INDEX], axis=1))

    def determinants(self) -> np.ndarray:
        return np.linalg.det(self.expand())

    def to_text(self) -> str:
        lines = [f"{PLASTIC_MAGIC} {PLASTIC_VERSION}", str(self.n_elements)]
        lines += [" ".join(format(float(v), ".17g") for v in row) for row in self.coeffs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path: Optional[str] = None) -> "PlasticField":
        """
        Parses the `plastic 1` ASCII format.

        Raises:
            ParseError: With the 1-based line number of the first bad line.
        """
        records = [(n, line.split()) for n, line in enumerate(text.splitlines(), start=1)
                   if line.strip() and not line.lstrip().startswith("#")]
        if len(records) < 2:
            raise ParseError(1, "plastic field file ends before the header", path)
        line, tokens = records[0]
        if tokens != [PLASTIC_MAGIC, PLASTIC_VERSION]:
            raise ParseError(line, f"expected header '{PLASTIC_MAGIC} {PLASTIC_VERSION}'", path)
        line, tokens = records[1]
        try:
            z = int(tokens[0])
        except ValueError:
            raise ParseError(line, f"element count must be an integer, got '{tokens[0]}'", path)
        if len(tokens) != 1 or z < 1:
            raise ParseError(line, "expected a single positive element count", path)
        rows = records[2:]
        if len(rows) != z:
            raise ParseError(rows[-1][0] if rows else line, f"expected {z} coefficient lines, found {len(rows)}", path)
        coeffs = np.empty((z, 6))
        for row, (line, tokens) in enumerate(rows):
            if len(tokens) != 6:
                raise ParseError(line, f"expected 6 coefficients, got {len(tokens)}", path)
            try:
                coeffs[row] = [float(t) for t in tokens]
            except ValueError:
                raise ParseError(line, "coefficients must be decimal numbers", path)
        return cls(coeffs=coeffs)

    def save(self, path: str) -> None:
        with open(path, "w", newline="\n") as file:
            file.write(self.to_text())
        logger.info(f"Wrote plastic field with {self.n_elements} elements to {path}.")

    @classmethod
    def load(cls, path: str) -> "PlasticField":
        with open(path, "r") as file:
            return cls.from_text(file.read(), path)

    def to_dict(self) -> Dict[str, Any]:
        return {"format": f"{PLASTIC_MAGIC} {PLASTIC_VERSION}", "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlasticField":
        return cls(coeffs=np.asarray(data["coeffs"], dtype=np.float64))


def identity_field(n_elements: int) -> PlasticField:
    """Field with the 3x3 identity on every element."""
    if n_elements < 1:
        raise ValueError(f"A plastic field needs at least one element, got {n_elements}.")
    return PlasticField(coeffs=np.tile([1.0, 0.0, 0.0, 1.0, 0.0, 1.0], (n_elements, 1)))


def project_eigenvalues(
    field: PlasticField, sigma_min: float = DEFAULT_SIGMA_MIN, sigma_max: float = DEFAULT_SIGMA_MAX
) -> PlasticField:
    """
    Clamps the eigenvalues of every element matrix to [sigma_min, sigma_max].

    Elements already inside the bounds keep their coefficients bit for bit, so the
    projection is idempotent.

    Args:
        field (PlasticField): Field to project.
        sigma_min (float): Lower eigenvalue bound, > 0.
        sigma_max (float): Upper eigenvalue bound, >= sigma_min.

    Returns:
        PlasticField: Projected field (the input object itself when nothing moves).
    """
    if not 0.0 < sigma_min <= sigma_max:
        raise ValueError(f"Need 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}].")
    eigvals, eigvecs = np.linalg.eigh(field.expand())
    slack = 1e-12
    outside = np.any((eigvals < sigma_min * (1.0 - slack)) | (eigvals > sigma_max * (1.0 + slack)), axis=1)
    if not outside.any():
        return field

    clamped = np.clip(eigvals[outside], sigma_min, sigma_max)
    vecs = eigvecs[outside]
    recomposed = np.einsum("zik,zk,zjk->zij", vecs, clamped, vecs)
    coeffs = field.coeffs.copy()
    coeffs[outside] = PlasticField.from_matrices(recomposed).coeffs
    logger.debug(f"Projected {int(outside.sum())} of {field.n_elements} plastic elements.")
    return PlasticField(coeffs=coeffs)


def element_masses(
    field: Optional[PlasticField], precomp: "ElementPrecomp", mat: "MaterialParams"
) -> np.ndarray:
    """(Z,) element masses rho * V_init * det(F_p) in kg."""
    det = np.ones(precomp.n_elements) if field is None else field.determinants()
    return mat.density_kg_m3 * precomp.volume_init * det

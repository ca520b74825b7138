"""Generalized Lame equations with Treibich-Verdier potential.

Weierstrass functions, monodromy of y'' = I_n(z; B, tau) y, the
Hermite-Halphen ansatz, spectral polynomials, pre-modular forms and
even solutions of the associated mean field equation.
"""

from .config import DEFAULT, Config, load_config
from .elliptic import (eval_weierstrass, half_period_mu, invariants, lattice, reduce_point, sigma,
                       wp, wp_inverse, wp_prime, zeta)
from .errors import HeunmonError
from .heun import (addition_degree_estimate, ansatz_residual, even_product_solution, extract_zero_set,
                   hermite_ansatz, order_check, potential, spectral_polynomial)
from .mfe import (count_even_solutions, developing_map, isomonodromy_check, isomonodromy_companion,
                  residual_suite)
from .monodromy import classify, monodromy_pair, rs_from_zero_set, transport
from .premodular import (builtin_form, eval_premodular, factorization_check_1100, hecke_Z,
                         transform_check, zero_search)
from .tuples import IndexTuple, as_tuple

__version__ = "0.1.0"

"""Massey products on spectral-sequence pages and the Toda brackets they detect."""

from .linalg import Modulus, PreconditionError, howell_form, solve, subquotient_presentation
from .coset import Coset
from .dga import FilteredDGA, random_instance, toda_bracket, toda_filtered
from .sseq import crossing_check, er_page, massey_on_page, turn_page
from .chart import ChartDocument, parse_chart, serialize_chart, load_any
from .deduce import FactBase
from .fixtures import fixtures

__version__ = "0.1.0"

"""First-order query engine for low-degree databases.

Preprocessing reduces (database, query, epsilon) to a quantifier-free query
over a colored graph together with a two-way answer encoding; counting,
constant-time membership testing, and constant-delay enumeration all run on
that reduced form.
"""

from .counting import count_answers, count_gen_conjunction
from .enumeration import Enumerator, build_enumerator
from .errors import LowdegError, ResourceCapExceeded, UnsupportedFragment
from .formulas import Formula, parse_query
from .model import Database, Signature, load_database
from .oracle import naive_eval
from .reduction import ReducedInstance, eliminate_quantifiers
from .storing import FactIndex, TupleStore, build_fact_index, build_store
from .tester import Tester, build_tester

__all__ = [
    "Database",
    "Enumerator",
    "FactIndex",
    "Formula",
    "LowdegError",
    "ReducedInstance",
    "ResourceCapExceeded",
    "Signature",
    "Tester",
    "TupleStore",
    "UnsupportedFragment",
    "build_enumerator",
    "build_fact_index",
    "build_store",
    "build_tester",
    "count_answers",
    "count_gen_conjunction",
    "eliminate_quantifiers",
    "load_database",
    "naive_eval",
    "parse_query",
]

__version__ = "0.1.0"

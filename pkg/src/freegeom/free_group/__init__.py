"""Exact computation in a free group: words, automorphisms, Whitehead, Stallings."""
from .words import (
    EMPTY,
    ConjugacyClass,
    Word,
    WordError,
    abelianization,
    all_classes,
    all_reduced_words,
    canonical_cyclic,
    conj_class,
    conjugate,
    cyclic_reduce,
    format_word,
    inverse,
    is_cyclically_reduced,
    mul,
    parse_word,
    power,
    random_word,
    reduce,
)
from .automorphism import (
    Automorphism,
    AutomorphismError,
    abelianization_matrix,
    apply,
    compose,
    elementary_moves,
    identity,
    inner,
    is_inner,
    load_automorphism_lines,
    nielsen_move,
    permutation,
)
from .stallings import (
    SubgroupError,
    SubgroupGraph,
    express_in_generators,
    induced_automorphism,
    invert_images,
    stallings_graph,
)
from .whitehead import (
    BudgetExceeded,
    are_jointly_basis,
    is_primitive,
    is_simple,
    minimal_orbit,
    whitehead_graph,
    whitehead_minimize,
)

"""Solver-neutral text templates for pickup problems (lp_solve syntax)."""

LP_PROBLEM_TEMPLATE = """/* daily pickup selection */
min: {objective};
c1: {constraint} >= {demand};
bin {variables};
"""


def _row(coefficients) -> str:
    terms = [f"{c!r}x{i}" for i, c in enumerate(coefficients)]
    return " + ".join(terms) if terms else "0"


def format_lp(costs, supplies, demand: float) -> str:
    """Render a min-cost covering problem with binary variables x0..xN-1."""
    variables = " ".join(f"x{i}" for i in range(len(costs)))
    return LP_PROBLEM_TEMPLATE.format(
        objective=_row(costs),
        constraint=_row(supplies),
        demand=repr(float(demand)),
        variables=variables,
    )

"""macronas: macro search-space modelling, module scoring, and search.

Pipeline overview: define a staged search space (`archspace`), sample and
label architectures against an oracle (`bench`), train rank-aligned graph
predictors (`predictor` on top of `numerics`), score stage subgraphs and
node features (`scorer`), reduce the space and construct architectures
(`builder`), and optionally run evolutionary search (`evonas`). The `cli`
module ties the steps together.
"""

__version__ = "0.1.0"

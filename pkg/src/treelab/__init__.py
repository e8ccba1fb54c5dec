"""Randomised regression trees and forests with a small verification lab."""

from .core import (AxisSplit, Cell, Dataset, GapError, InteractionRegion, NoCandidates,
                   ObliqueSplit, OracleUnavailable, OverlapError, Partition, RandomStream,
                   ZeroMassCell, cell_membership, cell_volume_mc, depth_for, partition_assign)
from .grower import (Forest, GrowConfig, SemiSample, Tree, fit_forest, grow_rsrf,
                     grow_semisample, grow_tree, mse_eval, predict)
from .impurity import (EMPTY, empirical_impurity, one_step_impurity, one_step_product_form,
                       population_impurity, population_V, two_step_decomposition_residual,
                       two_step_impurity)
from .oracle import (Additive, Constant, Custom, ExampleInteraction, NoiseSpec, PopulationModel,
                     conditional_moments_mc, example_closed_forms, sample_dataset)
from .splitters import (Cart, ExtraTrees, InteractionForest, Oblique, Rsrf, choose_best,
                        gen_cart, gen_extratrees, gen_interaction, gen_oblique, gen_rsrf)

__version__ = "0.1.0"

"""Path interventions on discrete structural causal models.

Build a model (in code or from a ``.scm.txt`` file), rewrite it under a do,
info or path intervention, and compute the exact joint law of factual and
path-counterfactual variables from the identifying factorization.  A
Monte Carlo sampler and a nested-counterfactual sampler serve as oracles.
"""

from .dsl import load_model, parse_model, serialize_model, to_model_file
from .errors import PathFxError
from .graph import (
    CausalPath,
    Dag,
    Diagram,
    Node,
    World,
    causal_diagram,
    desc_pi,
    directed_paths,
    find_recanting_witness,
    to_dot,
    validate_path,
)
from .infer import (
    Factor,
    Factorization,
    JointTable,
    exact_joint,
    expectation_contrast,
    marginalize,
    observational_factorization,
    pi_formula,
)
from .intervene import (
    DoIntervention,
    InfoIntervention,
    PathIntervenedModel,
    PathIntervention,
    apply_do,
    apply_info,
    apply_path,
    intervention_diagram,
)
from .model import (
    Cpt,
    CptModel,
    Domain,
    Mechanism,
    NoiseSpec,
    Scm,
    VariableSpec,
    build_cpt_model,
    build_scm,
    cpt_to_scm,
    decompose,
    recompose,
    scm_to_cpt,
)
from .sample import NestedSpec, nested_counterfactual_sample, sample_model, tv_distance

__version__ = "0.1.0"

"""Online variational inference for state-space models with particle filters.

The package learns model parameters and particle-proposal parameters
simultaneously from a stream of observations.  Three learners share one
machinery: a multi-sample importance-weighted gradient (osiwae), its
score-free baseline variant (ovsmc), and recursive maximum likelihood
(rml); per-particle score statistics are propagated online by an adaptive
forward/backward smoother.
"""

from .filtering import (DegenerateCloudError, ParticleCloud, ess, init_cloud,
                        multinomial_resample, mutate_and_reweight, normalize)
from .learning import (AdamState, LearnerConfig, adam_step, clip_gradient, osiwae_gradient,
                       ovsmc_gradient, rml_gradient, smc_osiwae_iteration)
from .nets import GaussianProposalHead, Mlp
from .params import (ALL_BLOCKS, MODEL_BLOCK, PROPOSAL_BLOCK, GradientEstimate, ParamVector,
                     restrict_to_blocks)
from .smoothing import (Rule, SmoothingSchedule, adasmooth_step, backward_probabilities,
                        smoothed_expectation)
from .ssm import (BootstrapProposal, GaussianProposal, NeuralProposal, StateSpaceModel,
                  SupportError, grad_log_weight, log_weight, propose)

__version__ = "0.1.0"

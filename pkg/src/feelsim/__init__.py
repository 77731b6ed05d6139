"""feelsim: deterministic federated edge learning over parallel fading channels."""

__version__ = "0.1.0"

from .capacity import (AllocationResult, BCBoundaryPoint, DegenerateChannelError,
                       bc_boundary, bc_waterfill, mac_region_contains, mac_waterfill)
from .channel import ChannelConfig, ChannelRealization, draw_downlink, draw_uplink
from .config import ExperimentConfig, IdxData, SyntheticData, load_config
from .data import (IdxFormatError, LabeledDataset, ShardingPlan, load_idx,
                   load_idx_dataset, parse_idx, shard_single_class,
                   synth_classification, write_idx)
from .learner import (AdamOptimizer, LocalSGDConfig, LogisticRegression, Mlp,
                      SgdOptimizer, evaluate, local_update)
from .protocol import (RoundReport, Simulation, build_simulation, run_experiment,
                       select_devices)
from .quantizer import (PayloadFormatError, QuantizedPayload, bit_count,
                        dequantize, max_level_for_budget, parse, quantize,
                        serialize, wire_bits)
from .rng import SeedTree

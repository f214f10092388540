"""Simulation and analysis of high-frequency signal propagation in
multiconductor power-line networks: reflectometric and end-to-end responses,
anomaly injection, chain/superposition effect models, and time-domain
localization."""

from .anomalies import (Anomaly, DeltaSpectrum, DistributedFault, LoadChange,
                        LumpedFault, apply_anomaly, delta_chain,
                        delta_superposition)
from .cables import (builtin_cable_library, cable_velocities,
                     constant_rlgc_cable, powerline_cable, scaled_cable)
from .errors import (DecompositionError, ParseError, PlnsimError,
                     SingularityError, UsageError, ValidationError)
from .experiments import (EnsembleConfig, Scenario, bundled_single_line_scenarios,
                          default_grid, generate_random_network,
                          run_backbone_lateral_study, run_distance_sweep,
                          run_scenario_suite)
from .mtl import (CableSpec, FrequencyGrid, MatrixSpectrum, PropagationParams,
                  ctf_line, echo_voltage, input_admittance_line,
                  input_reflection, input_reflection_modal,
                  line_input_reflection, line_propagation_params,
                  load_reflection, modal_transform, series_truncated_responses)
from .network import (AdmittanceSpec, Branch, NetworkTopology, Port,
                      conductance, constant_admittance, end_to_end_ctf,
                      farthest_node, network_input_reflection, open_circuit,
                      parallel_rc_admittance, port_signals, reduce_to_port,
                      table_admittance, tree_path, two_section_oracle,
                      validate_topology)
from .timedomain import (LocateResult, PeakList, TimeTrace,
                         check_peak_spacing_symmetry, detect_peaks,
                         locate_anomaly_reflectometric, segment_energy,
                         time_to_distance, to_time_domain)

__version__ = "0.1.0"

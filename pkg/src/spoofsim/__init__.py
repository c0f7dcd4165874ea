"""Deterministic sandbox for deep-learning wireless signal spoofing.

The package simulates a legitimate QPSK transmitter/receiver pair plus an
adversary pair at noise-normalised powers over Rayleigh block-fading MIMO
links, trains the receiver's signal-authentication network from scratch,
and mounts random, replay, and adversarially-learned (GAN) spoofing
attacks whose success rates can be swept over antenna counts, topologies,
and seeds.
"""

__version__ = "0.1.0"

from .attacks import (AttackReport, append_report_csv, run_gan_attack,
                      run_random_attack, run_replay_attack,
                      success_probability, train_spoofer)
from .authenticator import (FROM_T, NOT_T, Authenticator, ClassifierMetrics,
                            LabeledDataset, build_dataset, classify, evaluate,
                            load_dataset_csv, network_of, save_dataset_csv,
                            train_classifier, tune_hyperparameters)
from .channel import ChannelRealization, draw_channel
from .experiments import (ConfigError, ExperimentResult, ExperimentSpec,
                          benchmark_latency, build_version, parse_config,
                          run_experiment)
from .frontend import condition_rows, condition_rows_vjp, symbol_phasors
from .gan import (GanConfig, TrainingTrace, check_convergence,
                  discriminator_loss, generate_spoof_burst, generator_loss,
                  train_gan)
from .nn import (AdamState, DenseNetwork, Gradients, TrainConfig, adam_step,
                 backward, cross_entropy, cross_entropy_grad,
                 finite_diff_check, forward, init_network, load_model,
                 predict, save_model)
from .scenario import Position, ScenarioConfig, substream
from .waveform import (IQBurst, apply_channel, burst_from_bytes,
                       burst_from_features, burst_to_bytes, complex_awgn,
                       features, load_burst, qpsk_phases,
                       random_symbol_phases, sample_intended_burst,
                       sample_replay_burst, sample_waveform_burst, save_burst)

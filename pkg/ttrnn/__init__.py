from .tt_layer import TTCores, TTLayer, TTShape, tt_forward, tt_backward, tt_param_count, compression_rate
from .cells import RNNCell, init_cell, run_sequence
from .model import Classifier, SequenceClassifier
from .train import TrainConfig, fit
from .data import SequenceDataset, SequenceRecord, generate_synthetic, read_dataset, write_dataset

from .core import (
    CellKinds,
    DenseInputMap,
    DropoutSpec,
    HiddenState,
    NO_DROPOUT,
    RNNCell,
    TTInputMap,
    cell_params,
    fuse_gate_shape,
    gate_slices,
    gru_step,
    init_cell,
    lstm_step,
    pad_sequences,
    parse_kind,
    read_cell,
    run_batch,
    run_batch_backward,
    run_sequence,
    srnn_step,
    to_dense,
    with_params,
    write_cell,
    zero_grads,
)

from .adam import AdamState, adam_step
from .layers import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    MaxPoolLayer,
    NumericFaultError,
    ReLULayer,
    check_finite,
    softmax_xent,
    xavier_init,
)
from .network import (
    Network,
    accuracy,
    compile_network,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)

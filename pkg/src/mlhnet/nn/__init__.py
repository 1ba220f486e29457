from .layers import (BatchNorm2D, Conv2D, Flatten, Layer, Linear, MaxPool2x2, ReLU,
                     Sequential, softmax_cross_entropy)
from .model import Classifier, Model
from .optim import SGD, SgdConfig, sgd_step
from .gradcheck import finite_diff_gradcheck, numeric_gradient, relative_error

__all__ = [
    "BatchNorm2D", "Conv2D", "Flatten", "Layer", "Linear", "MaxPool2x2", "ReLU",
    "Sequential", "softmax_cross_entropy", "Classifier", "Model", "SGD", "SgdConfig",
    "sgd_step", "finite_diff_gradcheck", "numeric_gradient", "relative_error",
]

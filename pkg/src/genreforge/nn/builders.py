"""Builders for the two printed CNN architectures.

Pooling configurations are not printed in the layer tables; they are forced
by the output-shape columns and pinned here:

mfcc_cnn (input 130 x 13 x 1):
    all pools 2x2, stride 2, same padding      (128,11)->(64,6), (62,4)->(31,2), (30,1)->(15,1)
    convs 3x3, 3x3, 2x2, valid padding         the 2x2 kernel is forced by (31,2)->(30,1) with 4128 params

melspec_cnn (input 288 x 432 x 3):
    pools 1-2: 3x3, stride 2, valid            (288,432)->(143,215), (141,213)->(70,106)
    pools 3-5: 2x2, stride 2, valid            (68,104)->(34,52), (32,50)->(16,25), (14,23)->(7,11)
    conv 1: 3x3 same (shape-preserving); convs 2-5: 3x3 valid
"""

from .layers import (
    BatchNormSpec,
    Conv2DSpec,
    DenseSpec,
    DropoutSpec,
    FlattenSpec,
    MaxPool2DSpec,
)
from .model import ModelSpec

MFCC_CNN_INPUT = (130, 13, 1)
MELSPEC_CNN_INPUT = (288, 432, 3)
N_GENRES = 10


def build_mfcc_cnn(n_classes: int = N_GENRES) -> ModelSpec:
    """Three conv blocks, dropout 0.3, then a 64-unit head. 45,514 params."""
    return ModelSpec(
        input_shape=MFCC_CNN_INPUT,
        layers=(
            Conv2DSpec(filters=32, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="same"),
            BatchNormSpec(),
            Conv2DSpec(filters=32, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="same"),
            BatchNormSpec(),
            Conv2DSpec(filters=32, kernel=(2, 2), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="same"),
            BatchNormSpec(),
            DropoutSpec(rate=0.3),
            FlattenSpec(),
            DenseSpec(units=64, activation="relu"),
            DenseSpec(units=n_classes, activation="softmax"),
        ),
    )


def build_melspec_cnn(n_classes: int = N_GENRES) -> ModelSpec:
    """Five conv blocks over 288 x 432 x 3 images, dropout 0.5 in the head.
    679,862 params."""
    return ModelSpec(
        input_shape=MELSPEC_CNN_INPUT,
        layers=(
            BatchNormSpec(),
            Conv2DSpec(filters=32, kernel=(3, 3), padding="same", activation="relu"),
            MaxPool2DSpec(pool=(3, 3), stride=(2, 2), padding="valid"),
            Conv2DSpec(filters=32, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(3, 3), stride=(2, 2), padding="valid"),
            Conv2DSpec(filters=32, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="valid"),
            Conv2DSpec(filters=32, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="valid"),
            Conv2DSpec(filters=64, kernel=(3, 3), padding="valid", activation="relu"),
            MaxPool2DSpec(pool=(2, 2), stride=(2, 2), padding="valid"),
            FlattenSpec(),
            DenseSpec(units=128, activation="relu"),
            DropoutSpec(rate=0.5),
            BatchNormSpec(),
            DenseSpec(units=n_classes, activation="softmax"),
        ),
    )

"""Parameter counts of the reference Keras network, used to cross-check the
C++ builder. Prints: alpha freeze total trainable non_trainable."""
import os
import sys

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
import tensorflow as tf  # noqa: E402


def build(alpha, size, classes, freeze):
    base = tf.keras.applications.MobileNet(
        include_top=False, weights=None, alpha=alpha, input_shape=(size, size, 3))
    x = tf.keras.layers.GlobalAveragePooling2D()(base.output)
    x = tf.keras.layers.Dense(256, activation="relu",
                              kernel_regularizer=tf.keras.regularizers.l2(0.01))(x)
    x = tf.keras.layers.Dropout(0.25)(x)
    x = tf.keras.layers.Dense(128, activation="relu",
                              kernel_regularizer=tf.keras.regularizers.l2(0.01))(x)
    x = tf.keras.layers.Dropout(0.25)(x)
    out = tf.keras.layers.Dense(classes, activation="softmax")(x)
    model = tf.keras.Model(base.input, out)
    for layer in model.layers[:freeze]:
        layer.trainable = False
    return model, len(base.layers)


def count(weights):
    return sum(int(tf.size(w)) for w in weights)


if __name__ == "__main__":
    for alpha, size, freeze in [(1.0, 224, 80), (1.0, 224, 0), (0.25, 224, 0), (0.25, 64, 80)]:
        model, backbone = build(alpha, size, 7, freeze)
        t = count(model.trainable_weights)
        n = count(model.non_trainable_weights)
        print(alpha, size, freeze, t + n, t, n, "backbone_layers", backbone)
    sys.stdout.flush()

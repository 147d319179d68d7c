"""Counts trainable scalars of the mini segmentation transformer by hand.

Independent of the C++ build: walks the declared layers and multiplies out
their shapes. Used to freeze the expected total in nn_model_test.cpp.
"""


def count(L, h, d_h, embed_dim, ffn_hidden, num_classes, grid, patch, channels):
    assert embed_dim == h * d_h
    patches = grid * grid
    patch_dim = channels * patch * patch
    embed = patch_dim * embed_dim + embed_dim + patches * embed_dim
    per_block = 0
    for _ in ("q", "k", "v", "attn_out"):
        per_block += embed_dim * embed_dim + embed_dim
    per_block += embed_dim * ffn_hidden + ffn_hidden  # ffn1
    per_block += ffn_hidden * embed_dim + embed_dim  # ffn2
    decoder = embed_dim * num_classes + num_classes
    return embed + L * per_block + decoder


if __name__ == "__main__":
    # L=1, h=1, d_h=2, embed_dim=2, ffn_hidden=4, num_classes=3, 2x2 grid of 2x2 patches, 1 channel
    print("tiny", count(1, 1, 2, 2, 4, 3, 2, 2, 1))
    # default model: L=4, h=4, d_h=8, embed 32, ffn 128, 4 classes, 6x6 grid of 4x4 patches, 3 channels
    print("default", count(4, 4, 8, 32, 128, 4, 6, 4, 3))

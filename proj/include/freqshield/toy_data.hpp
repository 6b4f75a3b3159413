#pragma once

#include "freqshield/rng.hpp"
#include "freqshield/tensor.hpp"
#include "freqshield/training.hpp"

namespace freqshield {

/// Synthetic RGB scene: smooth colour ramp, soft-edged discs and bars, a low-frequency
/// grating and Gaussian blobs. Deterministic for a given stream state.
Tensor make_toy_image(int height, int width, RngStream& stream);

/// `count` HR/LR pairs: HR toy images of side lr_side * scale, LR by area downsampling.
PairedDataset make_toy_dataset(int count, int lr_side, int scale, RngStream& stream);

}  // namespace freqshield

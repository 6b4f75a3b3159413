#pragma once

#include <filesystem>

#include "freqshield/tensor.hpp"

namespace freqshield {

/// Reads an 8-bit PNG or a binary PPM (P6) / PGM (P5) into [0, 1] values with 1 or 3
/// channels. The format is detected from the file contents, not the extension.
/// Throws ImageError with kind MissingFile, UnsupportedFormat or CorruptPayload.
Tensor load_image(const std::filesystem::path& path);

/// Clamps to [0, 1], rounds to 8 bits and writes losslessly. The extension selects the
/// encoder: .ppm / .pgm for binary netpbm, anything else PNG. Throws ImageError
/// (Unwritable) when the file cannot be created.
void save_image(const Tensor& image, const std::filesystem::path& path);

std::uint8_t quantize_8bit(double value) noexcept;

}  // namespace freqshield

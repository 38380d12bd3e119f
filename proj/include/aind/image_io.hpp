#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aind/tensor.hpp"

namespace aind {

// Clamp to [0, 1], scale to 255 and round half away from zero.
std::uint8_t quantize8(float v);
std::uint16_t quantize16(float v);

// PNG (8/16-bit gray, gray+alpha, RGB, RGBA) or binary PPM/PGM, chosen by
// the file's magic bytes. Returns (1, H, W, C) in [0, 1] with C = 1 or 3;
// alpha is dropped.
Tensor<float> read_image(const std::filesystem::path& path);

// (1, H, W, C) with C = 1 or 3. bit_depth 8 or 16.
void write_png(const std::filesystem::path& path, const Tensor<float>& image, int bit_depth = 8);
void write_pnm(const std::filesystem::path& path, const Tensor<float>& image);
// Dispatches on the extension: .png, .ppm or .pgm.
void write_image(const std::filesystem::path& path, const Tensor<float>& image);

// Raw little-endian float32 payload; the shape lives in the manifest.
void write_raw(const std::filesystem::path& path, const Tensor<float>& t);
Tensor<float> read_raw(const std::filesystem::path& path, Shape shape);

// Sorted image files (.png, .ppm, .pgm) directly inside dir.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

// Adapts a (1, H, W, C) image to `channels` (luma for 3 -> 1, replicate for 1 -> 3).
Tensor<float> convert_channels(const Tensor<float>& image, int channels);

}  // namespace aind

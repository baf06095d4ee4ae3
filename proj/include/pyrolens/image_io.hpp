#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "pyrolens/raster.hpp"

namespace pyrolens {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary Netpbm: P5 (gray) and P6 (RGB), maxval 255 only.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

// 8-bit PNG. Gray-alpha and RGBA inputs lose their alpha channel.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Dispatches on file magic: P5, P6 or PNG.
Image read_image(const std::filesystem::path& path);
/// Dispatches on extension: .pgm, .ppm, .png (anything else is an error).
void write_image(const std::filesystem::path& path, const Image& img);

bool is_image_file(const std::filesystem::path& path);

}  // namespace pyrolens

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace shapefind {

enum class ImageFormat { Png, Jpeg };

struct ImageInfo {
    ImageFormat format;
    int width = 0;
    int height = 0;
};

/// Fully decodes a PNG or JPEG to verify it; throws Parse otherwise.
ImageInfo decode_image(std::span<const std::uint8_t> bytes);

std::string mime_type(ImageFormat format);

/// 8-bit grayscale PNG.
std::vector<std::uint8_t> encode_png_gray(int width, int height, std::span<const std::uint8_t> pixels);

} // namespace shapefind

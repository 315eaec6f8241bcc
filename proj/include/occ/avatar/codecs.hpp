#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occ/avatar/image.hpp"

namespace occ::avatar {

// JPEG round trip (libjpeg, 4:4:4 sampling). quality in [1, 100].
std::vector<std::uint8_t> jpeg_encode(const Image& img, int quality);
Image jpeg_decode(std::span<const std::uint8_t> bytes);

// Lossless PNG for corpus masters.
std::vector<std::uint8_t> png_encode(const Image& img);
Image png_decode(std::span<const std::uint8_t> bytes);

// Encode-then-decode at the given quality; marks the result lossy and keeps
// the size tag and source id.
Image lossy_reencode(const Image& img, int quality);

}  // namespace occ::avatar

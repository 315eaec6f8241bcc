#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occ/errors.hpp"

namespace occ::avatar {

// The four renditions the platform serves for one profile image.
inline constexpr int kSizeVariants[4] = {48, 73, 200, 400};

inline bool is_size_variant(int side) {
  for (int s : kSizeVariants)
    if (s == side) return true;
  return false;
}

// Square 3-channel 8-bit image, interleaved RGB rows.
struct Image {
  int side = 0;
  std::vector<std::uint8_t> rgb;  // side * side * 3
  std::string source_id;
  int size_tag = 0;   // one of kSizeVariants when platform-sized, else 0
  bool lossy = false; // has been through a lossy encode

  Image() = default;
  explicit Image(int side_) : side(side_) {
    if (side_ <= 0) throw DomainError("Image: non-positive side");
    rgb.assign(static_cast<std::size_t>(side_) * side_ * 3, 0);
  }

  std::uint8_t* px(int y, int x) {
    return rgb.data() + (static_cast<std::size_t>(y) * side + x) * 3;
  }
  const std::uint8_t* px(int y, int x) const {
    return rgb.data() + (static_cast<std::size_t>(y) * side + x) * 3;
  }
};

// Largest per-channel absolute difference; images must agree in side.
int max_pixel_deviation(const Image& a, const Image& b);

// Bilinear resample to a square target. Resizing to the current side returns
// the pixels unchanged.
Image resize(const Image& img, int target_side);

}  // namespace occ::avatar

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occ/avatar/corpus.hpp"
#include "occ/siamese/siamese.hpp"

namespace occ::harness {

// Cross-identity avatar distance scan (the collision countermeasure check).
struct ScanReport {
  std::size_t pair_count = 0;
  std::size_t below_threshold = 0;
  std::size_t below_half_threshold = 0;
  float min_distance = 0;
  float max_distance = 0;
  float threshold = 0;
  float bin_width = 0.001f;
  std::vector<std::size_t> histogram;  // bin i covers [i*bin_width, (i+1)*bin_width)
};

ScanReport collision_scan_embeddings(
    const std::vector<std::vector<float>>& embeddings, float threshold);

// Embeds every identity's 400x400 rendition and scans all cross pairs.
ScanReport collision_scan(const avatar::Corpus& corpus,
                          const siamese::Embedder& embedder, float threshold);

// Distribution statistics over every value of every vector.
struct VectorStats {
  std::size_t vector_count = 0;
  std::size_t value_count = 0;
  float min = 0;
  float max = 0;
  double mean = 0;
  double stddev = 0;
  float bin_width = 0.01f;
  float histogram_origin = 0;  // left edge of bin 0
  std::vector<std::size_t> histogram;
  std::vector<float> sorted_values;
};

VectorStats vector_stats(std::span<const siamese::FeatureVector> vectors);

}  // namespace occ::harness

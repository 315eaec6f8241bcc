#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "occ/avatar/corpus.hpp"
#include "occ/errors.hpp"
#include "occ/nn/model.hpp"
#include "occ/rng.hpp"

namespace occ::siamese {

inline constexpr int kEmbeddingLength = 128;

// The unit of botmaster identity a bot carries: one avatar's embedding plus
// its single-use flag.
struct FeatureVector {
  std::string id;
  std::vector<float> values;  // exactly kEmbeddingLength
  bool consumed = false;
};

// Euclidean distance between two embeddings. DomainError on length mismatch.
float distance(std::span<const float> a, std::span<const float> b);
float distance(const FeatureVector& a, const FeatureVector& b);

// Model plus the fixed layer chain and input size it was trained with.
struct Embedder {
  nn::ModelWeights model;
  std::vector<nn::LayerSpec> specs = nn::embedding_net_spec();
  int input_side = 128;

  std::vector<float> embed(const nn::Tensor& input) const {
    return nn::forward(model, specs, input);
  }
  std::vector<float> embed(const avatar::Image& img) const {
    return embed(avatar::to_input_tensor(img, input_side));
  }
  FeatureVector extract(const avatar::Image& img, std::string id) const {
    return FeatureVector{std::move(id), embed(img), false};
  }
};

// A training/validation pair, referencing corpus entries by index and size
// variant. Label 0 = same source (its 200 and 400 renditions), label 1 =
// different sources (400 vs 400).
struct AvatarPair {
  int left_identity = 0;
  int left_side = 0;
  int right_identity = 0;
  int right_side = 0;
  int label = 0;
};

struct PairRatio {
  int same = 1;
  int diff = 2;
};

// identities * ratio.same label-0 pairs and identities * ratio.diff label-1
// pairs, deterministically shuffled. CapacityError when the corpus cannot
// supply them.
std::vector<AvatarPair> build_pairs(const avatar::Corpus& corpus,
                                    PairRatio ratio, std::uint64_t seed);

struct TrainReport {
  std::vector<float> epoch_loss;       // mean train loss per epoch
  std::vector<float> epoch_accuracy;   // held-out accuracy per epoch
  std::vector<float> epoch_threshold;  // threshold calibrated on train pairs
  float final_threshold = 0;
  float final_accuracy = 0;
  int epochs_run = 0;
  double train_seconds = 0;
};

struct TrainResult {
  Embedder embedder;
  TrainReport report;
};

// Builds 1:2 pairs, splits 75/25, trains with per-pair SGD steps, and tracks
// held-out accuracy at a threshold calibrated on the training distances.
TrainResult train(const avatar::Corpus& corpus, const nn::TrainingConfig& cfg,
                  int input_side);

struct CalibrationReport {
  float threshold = 0;
  float max_same_distance = 0;
  float min_diff_distance = 0;
  int false_match_count = 0;  // label-1 pairs below threshold; 0 by construction
  int miss_count = 0;         // label-0 pairs at or above threshold
  int same_pairs = 0;
  int diff_pairs = 0;
};

// Threshold rule: midpoint between the largest same-pair distance not
// exceeding the smallest different-pair distance and that smallest distance;
// under overlap the threshold clamps to the smallest different-pair distance
// and overlapping same pairs count as misses. A different-pair below the
// threshold is impossible by construction.
CalibrationReport calibrate_from_distances(std::vector<float> same,
                                           std::vector<float> diff);

CalibrationReport calibrate_threshold(const Embedder& embedder,
                                      const avatar::Corpus& corpus,
                                      std::span<const AvatarPair> validation);

// key=value lines, one per field
std::string calibration_text(const CalibrationReport& report);

struct MatchResult {
  std::string id;
  float distance = 0;
};

// Thread-safe holder for the bot's vectors. Consumption is atomic with the
// successful-match decision; a consumed vector is never returned again.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::vector<FeatureVector> vecs);
  VectorStore(VectorStore&& o) noexcept : vecs_(std::move(o.vecs_)) {}
  VectorStore& operator=(VectorStore&& o) noexcept {
    vecs_ = std::move(o.vecs_);
    return *this;
  }

  // Text lines: id<TAB>consumed(0|1)<TAB>128 space-separated decimals.
  static VectorStore load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const;
  std::size_t unconsumed_count() const;
  FeatureVector snapshot(std::size_t i) const;
  void add(FeatureVector v);

  // Minimum-distance unconsumed vector; no consumption.
  std::optional<MatchResult> best_unconsumed(std::span<const float> probe) const;
  // Consumes and returns the minimum-distance unconsumed vector when its
  // distance is below the threshold.
  std::optional<MatchResult> match_and_consume(std::span<const float> probe,
                                               float threshold);
  bool consume(const std::string& id);

 private:
  mutable std::mutex mu_;
  std::vector<FeatureVector> vecs_;
};

// Match an avatar against the store: embeds it, returns the minimum-distance
// vector when below threshold and retires that vector. DomainError on an
// empty store or non-positive threshold.
std::optional<MatchResult> match(const avatar::Image& img,
                                 VectorStore& vectors,
                                 const Embedder& embedder, float threshold);

// The avatar-size experiment: mean embedding distance per size combination
// over R random-weight models. Rows are ordered (400,200), (400,73),
// (400,48), (200,73), (200,48), (73,48).
struct SizeDistanceRow {
  int size_a = 0;
  int size_b = 0;
  double mean_distance = 0;
};

std::vector<SizeDistanceRow> size_distance_experiment(
    const avatar::Corpus& corpus, int repetitions, std::uint64_t seed,
    int input_side);

}  // namespace occ::siamese

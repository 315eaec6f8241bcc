#include "occ/siamese/siamese.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace occ::siamese {

float distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw DomainError("distance: vector length mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    ss += d * d;
  }
  return static_cast<float>(std::sqrt(ss));
}

float distance(const FeatureVector& a, const FeatureVector& b) {
  return distance(std::span<const float>(a.values),
                  std::span<const float>(b.values));
}

std::vector<AvatarPair> build_pairs(const avatar::Corpus& corpus,
                                    PairRatio ratio, std::uint64_t seed) {
  const int n = corpus.size();
  if (ratio.same < 1 || ratio.diff < 1)
    throw DomainError("build_pairs: ratio parts must be >= 1");
  if (n < 2)
    throw CapacityError("build_pairs: need at least 2 identities, have " +
                        std::to_string(n));
  // label-0 pairs need both renditions of every source
  for (int i = 0; i < n; ++i) {
    corpus.variant_bytes(i, 200);
    corpus.variant_bytes(i, 400);
  }

  Rng rng(derive_seed(seed, 0xb411));
  std::vector<AvatarPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (ratio.same + ratio.diff));
  for (int r = 0; r < ratio.same; ++r)
    for (int i = 0; i < n; ++i)
      pairs.push_back(AvatarPair{i, 200, i, 400, 0});
  for (int r = 0; r < ratio.diff; ++r)
    for (int i = 0; i < n; ++i) {
      const int a = static_cast<int>(rng.index(n));
      int b = static_cast<int>(rng.index(n - 1));
      if (b >= a) ++b;
      pairs.push_back(AvatarPair{a, 400, b, 400, 1});
    }
  rng.shuffle(pairs);
  return pairs;
}

namespace {

// Caches decoded + tensorized corpus variants across epochs.
class TensorCache {
 public:
  TensorCache(const avatar::Corpus& corpus, int input_side)
      : corpus_(corpus), input_side_(input_side) {}

  const nn::Tensor& get(int identity, int side) {
    const auto key = std::make_pair(identity, side);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_
               .emplace(key, avatar::to_input_tensor(
                                 corpus_.variant(identity, side), input_side_))
               .first;
    }
    return it->second;
  }

 private:
  const avatar::Corpus& corpus_;
  int input_side_;
  std::map<std::pair<int, int>, nn::Tensor> cache_;
};

struct DistanceSets {
  std::vector<float> same;
  std::vector<float> diff;
};

DistanceSets pair_distances(const Embedder& embedder, TensorCache& cache,
                            std::span<const AvatarPair> pairs) {
  std::map<std::pair<int, int>, std::vector<float>> embeddings;
  auto embed = [&](int identity, int side) -> const std::vector<float>& {
    const auto key = std::make_pair(identity, side);
    auto it = embeddings.find(key);
    if (it == embeddings.end())
      it = embeddings.emplace(key, embedder.embed(cache.get(identity, side)))
               .first;
    return it->second;
  };
  DistanceSets out;
  for (const AvatarPair& p : pairs) {
    const float d = distance(embed(p.left_identity, p.left_side),
                             embed(p.right_identity, p.right_side));
    (p.label == 0 ? out.same : out.diff).push_back(d);
  }
  return out;
}

float accuracy_at(const DistanceSets& d, float threshold) {
  std::size_t correct = 0;
  for (float v : d.same)
    if (v < threshold) ++correct;
  for (float v : d.diff)
    if (v >= threshold) ++correct;
  const std::size_t total = d.same.size() + d.diff.size();
  return total == 0 ? 0.0f
                    : static_cast<float>(correct) / static_cast<float>(total);
}

}  // namespace

CalibrationReport calibrate_from_distances(std::vector<float> same,
                                           std::vector<float> diff) {
  if (same.empty() || diff.empty())
    throw DomainError("calibrate: validation set must contain both labels");
  CalibrationReport rep;
  rep.same_pairs = static_cast<int>(same.size());
  rep.diff_pairs = static_cast<int>(diff.size());
  const float min_diff = *std::min_element(diff.begin(), diff.end());
  rep.min_diff_distance = min_diff;
  rep.max_same_distance = *std::max_element(same.begin(), same.end());

  float max_same_ok = -1.0f;
  bool overlap = false;
  for (float v : same) {
    if (v <= min_diff)
      max_same_ok = std::max(max_same_ok, v);
    else
      overlap = true;
  }
  if (!overlap && max_same_ok >= 0.0f)
    rep.threshold = 0.5f * (max_same_ok + min_diff);
  else
    rep.threshold = min_diff;

  for (float v : diff)
    if (v < rep.threshold) ++rep.false_match_count;
  for (float v : same)
    if (v >= rep.threshold) ++rep.miss_count;
  return rep;
}

CalibrationReport calibrate_threshold(const Embedder& embedder,
                                      const avatar::Corpus& corpus,
                                      std::span<const AvatarPair> validation) {
  TensorCache cache(corpus, embedder.input_side);
  DistanceSets d = pair_distances(embedder, cache, validation);
  return calibrate_from_distances(std::move(d.same), std::move(d.diff));
}

std::string calibration_text(const CalibrationReport& report) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "threshold=%.9g\nmax_same_distance=%.9g\n"
                "min_diff_distance=%.9g\nfalse_match_count=%d\nmiss_count=%d\n"
                "same_pairs=%d\ndiff_pairs=%d\n",
                double(report.threshold), double(report.max_same_distance),
                double(report.min_diff_distance), report.false_match_count,
                report.miss_count, report.same_pairs, report.diff_pairs);
  return buf;
}

TrainResult train(const avatar::Corpus& corpus, const nn::TrainingConfig& cfg,
                  int input_side) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<AvatarPair> pairs = build_pairs(corpus, PairRatio{1, 2}, cfg.seed);
  const std::size_t train_count = (pairs.size() * 3) / 4;  // 75% / 25%
  std::vector<AvatarPair> train_pairs(pairs.begin(), pairs.begin() + train_count);
  std::vector<AvatarPair> test_pairs(pairs.begin() + train_count, pairs.end());

  TrainResult result;
  result.embedder.input_side = input_side;
  result.embedder.model =
      nn::init_model(result.embedder.specs, input_side, cfg.seed);

  TensorCache cache(corpus, input_side);
  std::vector<nn::Tensor> grads = nn::zero_like(result.embedder.model.params);

  auto evaluate = [&]() {
    DistanceSets train_d =
        pair_distances(result.embedder, cache, train_pairs);
    const CalibrationReport cal =
        calibrate_from_distances(std::move(train_d.same), std::move(train_d.diff));
    DistanceSets test_d = pair_distances(result.embedder, cache, test_pairs);
    result.report.epoch_threshold.push_back(cal.threshold);
    result.report.epoch_accuracy.push_back(accuracy_at(test_d, cal.threshold));
    result.report.final_threshold = cal.threshold;
    result.report.final_accuracy = result.report.epoch_accuracy.back();
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_fill = 0;
    try {
      for (std::size_t pi = 0; pi < order.size(); ++pi) {
        const AvatarPair& p = train_pairs[order[pi]];
        loss_sum += nn::pair_loss_and_grads(
            result.embedder.model, result.embedder.specs,
            cache.get(p.left_identity, p.left_side),
            cache.get(p.right_identity, p.right_side), p.label, cfg.margin,
            grads);
        if (++batch_fill == static_cast<std::size_t>(cfg.batch_size) ||
            pi + 1 == order.size()) {
          nn::sgd_update(result.embedder.model, grads, cfg.learning_rate,
                         1.0f / static_cast<float>(batch_fill));
          for (nn::Tensor& g : grads) g.fill(0.0f);
          batch_fill = 0;
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("train: divergence in epoch " + std::to_string(epoch) +
                             ": " + e.what(),
                         e.layer_index);
    }

    result.report.epoch_loss.push_back(
        train_pairs.empty()
            ? 0.0f
            : static_cast<float>(loss_sum / static_cast<double>(train_pairs.size())));
    evaluate();
    result.report.epochs_run = epoch + 1;
  }

  if (cfg.epochs == 0) evaluate();

  result.report.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// --- vector store -----------------------------------------------------------

VectorStore::VectorStore(std::vector<FeatureVector> vecs)
    : vecs_(std::move(vecs)) {
  for (const FeatureVector& v : vecs_)
    if (v.values.size() != kEmbeddingLength)
      throw DomainError("VectorStore: vector " + v.id + " has length " +
                        std::to_string(v.values.size()));
}

std::size_t VectorStore::size() const {
  std::lock_guard lock(mu_);
  return vecs_.size();
}

std::size_t VectorStore::unconsumed_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const FeatureVector& v : vecs_)
    if (!v.consumed) ++n;
  return n;
}

FeatureVector VectorStore::snapshot(std::size_t i) const {
  std::lock_guard lock(mu_);
  return vecs_.at(i);
}

void VectorStore::add(FeatureVector v) {
  if (v.values.size() != kEmbeddingLength)
    throw DomainError("VectorStore::add: bad vector length");
  std::lock_guard lock(mu_);
  vecs_.push_back(std::move(v));
}

std::optional<MatchResult> VectorStore::best_unconsumed(
    std::span<const float> probe) const {
  std::lock_guard lock(mu_);
  std::optional<MatchResult> best;
  for (const FeatureVector& v : vecs_) {
    if (v.consumed) continue;
    const float d = distance(probe, std::span<const float>(v.values));
    if (!best || d < best->distance) best = MatchResult{v.id, d};
  }
  return best;
}

std::optional<MatchResult> VectorStore::match_and_consume(
    std::span<const float> probe, float threshold) {
  std::lock_guard lock(mu_);
  FeatureVector* best = nullptr;
  float best_d = 0;
  for (FeatureVector& v : vecs_) {
    if (v.consumed) continue;
    const float d = distance(probe, std::span<const float>(v.values));
    if (!best || d < best_d) {
      best = &v;
      best_d = d;
    }
  }
  if (!best || !(best_d < threshold)) return std::nullopt;
  best->consumed = true;
  return MatchResult{best->id, best_d};
}

bool VectorStore::consume(const std::string& id) {
  std::lock_guard lock(mu_);
  for (FeatureVector& v : vecs_) {
    if (v.id == id && !v.consumed) {
      v.consumed = true;
      return true;
    }
  }
  return false;
}

VectorStore VectorStore::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("vector file: cannot open " + path);
  std::vector<FeatureVector> vecs;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw FormatError("vector file: malformed line: " + line);
    FeatureVector v;
    v.id = line.substr(0, t1);
    const std::string flag = line.substr(t1 + 1, t2 - t1 - 1);
    if (flag != "0" && flag != "1")
      throw FormatError("vector file: bad consumed flag: " + flag);
    v.consumed = flag == "1";
    std::istringstream rest(line.substr(t2 + 1));
    float x;
    while (rest >> x) v.values.push_back(x);
    if (v.values.size() != kEmbeddingLength)
      throw FormatError("vector file: expected 128 values, got " +
                        std::to_string(v.values.size()));
    vecs.push_back(std::move(v));
  }
  return VectorStore(std::move(vecs));
}

void VectorStore::save(const std::string& path) const {
  std::lock_guard lock(mu_);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("vector file: cannot open for write " + path);
  char buf[32];
  for (const FeatureVector& v : vecs_) {
    f << v.id << '\t' << (v.consumed ? '1' : '0') << '\t';
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v.values[i]));
      if (i) f << ' ';
      f << buf;
    }
    f << '\n';
  }
}

std::optional<MatchResult> match(const avatar::Image& img,
                                 VectorStore& vectors,
                                 const Embedder& embedder, float threshold) {
  if (threshold <= 0) throw DomainError("match: threshold must be positive");
  if (vectors.size() == 0) throw DomainError("match: empty vector list");
  const std::vector<float> probe = embedder.embed(img);
  return vectors.match_and_consume(probe, threshold);
}

std::vector<SizeDistanceRow> size_distance_experiment(
    const avatar::Corpus& corpus, int repetitions, std::uint64_t seed,
    int input_side) {
  if (repetitions < 1)
    throw DomainError("size_distance_experiment: repetitions must be >= 1");
  if (corpus.size() < 1)
    throw CapacityError("size_distance_experiment: empty corpus");

  static constexpr std::pair<int, int> kCombos[6] = {
      {400, 200}, {400, 73}, {400, 48}, {200, 73}, {200, 48}, {73, 48}};

  std::vector<SizeDistanceRow> rows(6);
  for (int k = 0; k < 6; ++k)
    rows[k] = SizeDistanceRow{kCombos[k].first, kCombos[k].second, 0.0};

  // Tensors are model-independent; compute them once.
  std::vector<std::map<int, nn::Tensor>> tensors(corpus.size());
  for (int i = 0; i < corpus.size(); ++i)
    for (int s : avatar::kSizeVariants)
      tensors[i][s] = avatar::to_input_tensor(corpus.variant(i, s), input_side);

  Embedder embedder;
  embedder.input_side = input_side;
  for (int r = 0; r < repetitions; ++r) {
    embedder.model = nn::init_model(embedder.specs, input_side,
                                    derive_seed(seed, 0x512e, static_cast<std::uint64_t>(r)));
    for (int i = 0; i < corpus.size(); ++i) {
      std::map<int, std::vector<float>> em;
      for (int s : avatar::kSizeVariants) em[s] = embedder.embed(tensors[i][s]);
      for (int k = 0; k < 6; ++k)
        rows[k].mean_distance +=
            distance(em[kCombos[k].first], em[kCombos[k].second]);
    }
  }
  const double scale = 1.0 / (static_cast<double>(repetitions) * corpus.size());
  for (SizeDistanceRow& row : rows) row.mean_distance *= scale;
  return rows;
}

}  // namespace occ::siamese

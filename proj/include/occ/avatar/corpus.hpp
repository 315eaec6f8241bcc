#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "occ/avatar/image.hpp"
#include "occ/nn/tensor.hpp"

namespace occ::avatar {

struct CorpusSpec {
  int identities = 0;
  std::uint64_t seed = 0;
  bool forbid_flat = true;  // reject masters with a dominant solid background
  int quality = 85;         // upload-compression quality for size variants
};

// ">=40% of pixels within one 8-bit level of the modal color" detector used
// to reject the flat-background style that is known to collide.
bool flat_background(const Image& img);

// Deterministic procedural master: gradient field + multi-octave value noise
// + a handful of random shapes. 400x400.
Image generate_master(std::uint64_t seed, int identity_index,
                      bool forbid_flat);

// A set of identities, each with a lossless 400x400 master and the four
// lossy platform variants. Masters from generated corpora are recomputed
// from the seed on demand, so only encoded variant bytes stay resident.
class Corpus {
 public:
  static Corpus generate(const CorpusSpec& spec);
  static Corpus load(const std::string& dir);
  void save(const std::string& dir) const;

  int size() const { return static_cast<int>(ids_.size()); }
  const std::string& id(int i) const { return ids_.at(i); }
  int index_of(const std::string& id) const;

  Image master(int i) const;
  Image variant(int i, int side) const;  // decoded, lossy-flagged
  const std::vector<std::uint8_t>& variant_bytes(int i, int side) const;

  const CorpusSpec& spec() const { return spec_; }

 private:
  CorpusSpec spec_;
  bool generated_ = false;
  std::vector<std::string> ids_;
  // per identity: size -> encoded JPEG bytes
  std::vector<std::map<int, std::vector<std::uint8_t>>> variants_;
  // only populated for corpora loaded from disk
  std::vector<std::vector<std::uint8_t>> master_png_;
};

// Resize to the model input side and scale to [0,1], channel-major.
nn::Tensor to_input_tensor(const Image& img, int input_side);

}  // namespace occ::avatar

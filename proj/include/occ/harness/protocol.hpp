#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "occ/codec/codec.hpp"
#include "occ/osn/client.hpp"
#include "occ/siamese/siamese.hpp"
#include "occ/tweetgen/tweetgen.hpp"

namespace occ::harness {

// The co-ordinates both sides derive independently: where to look, which
// trend rule, how long bots wait, and how deep they crawl.
struct RendezvousRule {
  std::string area = "area-1";
  std::string rule_id = "last-above-10k";
  int cadence_minutes = 60;
  int wait_minutes = 5;
  int crawl_budget = 1000;

  void validate() const {
    if (wait_minutes < 0) throw DomainError("rule: wait must be >= 0");
    if (crawl_budget < 1) throw DomainError("rule: crawl budget must be >= 1");
    if (cadence_minutes < 1) throw DomainError("rule: cadence must be >= 1");
  }
};

// The last trend (in returned order) with a reported volume; falls back to
// the top trend when nothing clears the volume gate. Deterministic, so
// botmaster and bots always agree on the same snapshot.
osn::Trend select_trend(const std::vector<osn::Trend>& trends,
                        const RendezvousRule& rule,
                        bool* used_fallback = nullptr);

struct AugmentParams {
  double alpha = 0.1;
  int num_aug = 50;
};

struct PublishReport {
  bool success = false;
  codec::Ipv4 address{};
  std::string topic;
  bool trend_fallback = false;
  osn::SimMinutes epoch = 0;
  osn::SimMinutes posted_at = 0;
  int crawled = 0;
  int cleaned = 0;
  int augmented = 0;
  int candidates = 0;       // after keyword filter + variant expansion
  std::size_t attempts = 0; // distinct candidates hashed
  int collision_rounds = 0;
  std::array<osn::TweetId, 2> tweet_ids{0, 0};
  std::string failure;
};

// Crawl up to `budget` tweets for a query via cursor pagination.
std::vector<osn::Tweet> crawl(osn::OsnClient& client, const std::string& query,
                              int budget);

class Botmaster {
 public:
  Botmaster(osn::OsnClient& client, RendezvousRule rule,
            const tweetgen::SynonymLexicon& lexicon, AugmentParams aug = {});

  // The publish stage end to end: select trend, crawl, clean, augment,
  // keyword-filter, expand, collide (one noisy retry), then post the two
  // command tweets in part order. Nothing is posted on failure.
  PublishReport publish(const codec::Ipv4& command,
                        const osn::AccountCredentials& account,
                        std::uint64_t seed,
                        std::optional<osn::SimMinutes> epoch = {});

 private:
  osn::OsnClient& client_;
  RendezvousRule rule_;
  const tweetgen::SynonymLexicon& lexicon_;
  AugmentParams aug_;
};

struct CycleStats {
  osn::SimMinutes epoch = 0;
  std::string topic;
  std::size_t tweets_crawled = 0;
  std::size_t distinct_authors = 0;
  // 1-based position, in crawl order, of the matched author's newest tweet
  std::optional<std::size_t> match_depth;
  std::string matched_account;
  std::string matched_vector;
  float matched_distance = 0;
  // closest (distance, vector) seen across every crawled avatar
  float best_distance_seen = -1;
  std::string best_vector_seen;
  std::string protocol_error;
};

class Bot {
 public:
  Bot(std::string bot_id, osn::OsnClient& client, siamese::Embedder embedder,
      siamese::VectorStore vectors, RendezvousRule rule, float threshold,
      std::string state_path = "");

  // One Get Commands pass against the given trend-snapshot epoch. Returns the
  // decoded command on success; the matched vector is retired only after a
  // clean decode.
  std::optional<codec::Ipv4> cycle(osn::SimMinutes epoch,
                                   CycleStats* stats = nullptr);

  const std::string& id() const { return id_; }
  siamese::VectorStore& vectors() { return vectors_; }
  const std::vector<codec::Ipv4>& command_log() const { return commands_; }
  float threshold() const { return threshold_; }

 private:
  const std::vector<float>& embed_avatar(const std::vector<std::uint8_t>& jpeg);

  std::string id_;
  osn::OsnClient& client_;
  siamese::Embedder embedder_;
  siamese::VectorStore vectors_;
  RendezvousRule rule_;
  float threshold_;
  std::string state_path_;
  std::vector<codec::Ipv4> commands_;
  // keyed by content hash of the served avatar bytes
  std::unordered_map<std::uint64_t, std::vector<float>> avatar_cache_;
};

struct ReplayBotOutcome {
  std::string bot_id;
  bool was_offline_for_original = false;
  bool accepted = false;
  std::optional<codec::Ipv4> decoded;
  std::string note;  // "authentication required" flag on accepted replays
};

struct ReplayReport {
  bool publish_success = false;
  osn::SimMinutes epoch = 0;
  int acceptances = 0;
  std::vector<ReplayBotOutcome> outcomes;
};

// Replay scenario: an adversary account re-adopts a previously served
// botmaster avatar and publishes a fake command at the next appointed time.
// Bots that saw the original publish hold a consumed vector and must reject;
// bots that were offline then still hold it and accept.
ReplayReport adversary_replay(osn::OsnClient& client,
                              const std::string& admin_token,
                              const std::vector<std::uint8_t>& saved_avatar_jpeg,
                              const codec::Ipv4& fake_command,
                              std::vector<Bot*>& bots,
                              const std::vector<bool>& was_offline,
                              const RendezvousRule& rule,
                              const tweetgen::SynonymLexicon& lexicon,
                              std::uint64_t seed);

}  // namespace occ::harness

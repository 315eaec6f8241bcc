#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "occ/avatar/corpus.hpp"
#include "occ/harness/protocol.hpp"
#include "occ/osn/service.hpp"
#include "occ/siamese/siamese.hpp"

namespace occ::harness {

struct HarnessConfig {
  std::string out_dir = "reports";
  std::uint64_t seed = 7;

  // service endpoint: "local" spins an in-process service from `service`;
  // "host:port" talks to a running osn-sim instance
  std::string service = "local";
  osn::ServiceConfig service_config;

  // desk-scale model
  int input_side = 64;
  int train_identities = 200;
  nn::TrainingConfig training;

  RendezvousRule rule;
  AugmentParams augment;
  std::string lexicon_path;  // empty = data/lexicon.tsv next to the binary's cwd

  // protocol runs
  int bots = 7;
  int commands = 20;
  std::uint64_t prepared_seed = 0;  // corpus seed for botmaster avatars (0 = derived)

  // experiment knobs
  std::vector<int> hit_rate_candidates = {50000, 100000, 200000, 330000};
  int hit_rate_trials = 50;
  std::vector<int> waits = {5, 30, 60, 120};
  int crawl_trials = 7;
  int scan_identities = 500;
  int throughput_avatars = 200;

  // artifacts for the standalone publish/bot/replay verbs
  std::string model_path;
  std::string vectors_path;
  std::string artifacts_dir;

  static HarnessConfig from_json_text(const std::string& text,
                                      const std::string& base_dir = "");
  static HarnessConfig load(const std::string& path);
};

// Trained model, calibration, and the corpora every experiment shares. Built
// lazily once per config.
struct Artifacts {
  avatar::Corpus train_corpus;
  siamese::TrainResult trained;
  siamese::CalibrationReport calibration;
  double train_seconds = 0;
};

const Artifacts& prepare_artifacts(const HarnessConfig& cfg);

struct ExperimentOutcome {
  std::string name;
  bool ok = false;
  std::string csv_path;
  std::string meta_path;
  std::map<std::string, double> metrics;
};

// name in {gen-efficiency, hit-rate, recognition-throughput, crawl-vs-wait,
// end-to-end}; UsageError otherwise. Writes <name>.csv and <name>.meta.json
// under cfg.out_dir.
ExperimentOutcome run_experiment(const std::string& name,
                                 const HarnessConfig& cfg);

// Shared helper: the end-to-end protocol run. Returns per-delivery records.
struct DeliveryRecord {
  int command_index = 0;
  std::string bot_id;
  codec::Ipv4 published{};
  std::optional<codec::Ipv4> decoded;
  bool correct = false;
  std::optional<std::size_t> depth;
};

struct EndToEndResult {
  std::vector<DeliveryRecord> records;
  int publish_failures = 0;
  double seconds = 0;
  bool all_correct = false;
};

EndToEndResult run_end_to_end(const HarnessConfig& cfg);

// The replay attack scenario: a real publish observed by all but
// `offline_count` bots, then an adversary re-adopts the served avatar and
// publishes a fake command at the next appointed time. The contract holds
// when exactly the offline bots accept the fake command.
struct ReplayScenarioResult {
  bool original_publish_success = false;
  int total_bots = 0;
  int offline_bots = 0;
  ReplayReport replay;
  bool contract_ok = false;
};

ReplayScenarioResult run_replay_scenario(const HarnessConfig& cfg,
                                         int offline_count);

}  // namespace occ::harness

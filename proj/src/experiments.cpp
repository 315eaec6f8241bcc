#include "occ/harness/experiments.hpp"
#include "occ/harness/analysis.hpp"
#include "occ/harness/report.hpp"

#include "occ/avatar/codecs.hpp"
#include "occ/osn/client.hpp"
#include "occ/osn/http.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace occ::harness {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

// --- config -------------------------------------------------------------------

HarnessConfig HarnessConfig::from_json_text(const std::string& text,
                                            const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("harness config: ") + e.what());
  }
  HarnessConfig cfg;
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.service = j.value("service", cfg.service);
  if (j.contains("service_config")) {
    const std::string inner = j.at("service_config").dump();
    cfg.service_config = osn::ServiceConfig::from_json_text(inner, base_dir);
  }
  cfg.input_side = j.value("input_side", cfg.input_side);
  cfg.train_identities = j.value("train_identities", cfg.train_identities);
  cfg.training.epochs = j.value("epochs", cfg.training.epochs);
  cfg.training.learning_rate = j.value("learning_rate", cfg.training.learning_rate);
  cfg.training.margin = j.value("margin", cfg.training.margin);
  cfg.training.batch_size = j.value("batch_size", cfg.training.batch_size);
  cfg.rule.area = j.value("area", cfg.rule.area);
  cfg.rule.cadence_minutes = j.value("cadence_minutes", cfg.rule.cadence_minutes);
  cfg.rule.wait_minutes = j.value("wait_minutes", cfg.rule.wait_minutes);
  cfg.rule.crawl_budget = j.value("crawl_budget", cfg.rule.crawl_budget);
  cfg.augment.alpha = j.value("alpha", cfg.augment.alpha);
  cfg.augment.num_aug = j.value("num_aug", cfg.augment.num_aug);
  cfg.lexicon_path = j.value("lexicon_path", cfg.lexicon_path);
  if (!cfg.lexicon_path.empty() && !base_dir.empty() && cfg.lexicon_path[0] != '/')
    cfg.lexicon_path = base_dir + "/" + cfg.lexicon_path;
  cfg.bots = j.value("bots", cfg.bots);
  cfg.commands = j.value("commands", cfg.commands);
  cfg.prepared_seed = j.value("prepared_seed", cfg.prepared_seed);
  if (j.contains("hit_rate_candidates"))
    cfg.hit_rate_candidates =
        j.at("hit_rate_candidates").get<std::vector<int>>();
  cfg.hit_rate_trials = j.value("hit_rate_trials", cfg.hit_rate_trials);
  if (j.contains("waits")) cfg.waits = j.at("waits").get<std::vector<int>>();
  cfg.crawl_trials = j.value("crawl_trials", cfg.crawl_trials);
  cfg.scan_identities = j.value("scan_identities", cfg.scan_identities);
  cfg.throughput_avatars = j.value("throughput_avatars", cfg.throughput_avatars);
  cfg.model_path = j.value("model_path", cfg.model_path);
  cfg.vectors_path = j.value("vectors_path", cfg.vectors_path);
  cfg.artifacts_dir = j.value("artifacts_dir", cfg.artifacts_dir);
  return cfg;
}

HarnessConfig HarnessConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("harness config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::size_t slash = path.find_last_of('/');
  return from_json_text(ss.str(),
                        slash == std::string::npos ? "" : path.substr(0, slash));
}

void write_metadata(const std::string& path,
                    const std::map<std::string, std::string>& entries) {
  nlohmann::json j;
  for (const auto& [k, v] : entries) j[k] = v;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("metadata: cannot open " + path);
  f << j.dump(2) << '\n';
}

// --- shared setup ----------------------------------------------------------------

namespace {

const tweetgen::SynonymLexicon& lexicon_for(const HarnessConfig& cfg) {
  static std::mutex mu;
  static std::map<std::string, tweetgen::SynonymLexicon> cache;
  std::string path = cfg.lexicon_path;
  if (path.empty()) {
#ifdef OCC_DATA_DIR
    path = std::string(OCC_DATA_DIR) + "/lexicon.tsv";
#else
    throw ConfigError("harness: lexicon_path not set");
#endif
  }
  std::lock_guard lock(mu);
  auto it = cache.find(path);
  if (it == cache.end())
    it = cache.emplace(path, tweetgen::SynonymLexicon::load(path)).first;
  return it->second;
}

osn::ServiceConfig effective_service_config(const HarnessConfig& cfg) {
  osn::ServiceConfig scfg = cfg.service_config;
  if (scfg.areas.empty()) {
    osn::AreaConfig area;
    area.id = cfg.rule.area;
    area.topics = {
        {"skyfest", 8.5},       {"parade", 7.4},      {"rooftop cinema", 4.0},
        {"harbor nights", 3.0}, {"soup season", 1.5}, {"quiet hours", 0.8},
    };
    scfg.areas.push_back(std::move(area));
  }
  return scfg;
}

// One service handle per run: either an in-process instance or a remote one.
struct ServiceHandle {
  std::unique_ptr<osn::Service> local;
  std::string host;
  int port = 0;

  std::unique_ptr<osn::OsnClient> make_client() {
    if (local) return std::make_unique<osn::LocalClient>(*local);
    return std::make_unique<osn::HttpClient>(host, port);
  }
};

ServiceHandle open_service(const HarnessConfig& cfg) {
  ServiceHandle h;
  if (cfg.service == "local") {
    h.local = std::make_unique<osn::Service>(effective_service_config(cfg));
    return h;
  }
  const std::size_t colon = cfg.service.find_last_of(':');
  if (colon == std::string::npos)
    throw ConfigError("harness: service must be \"local\" or host:port");
  h.host = cfg.service.substr(0, colon);
  h.port = std::stoi(cfg.service.substr(colon + 1));
  return h;
}

PublishReport botmaster_publish_once(const HarnessConfig& cfg,
                                     const tweetgen::SynonymLexicon& lex,
                                     osn::OsnClient& client,
                                     const codec::Ipv4& command,
                                     const osn::AccountCredentials& account,
                                     osn::SimMinutes epoch, int attempt) {
  Botmaster bm(client, cfg.rule, lex, cfg.augment);
  return bm.publish(
      command, account,
      derive_seed(cfg.seed, 0x9b17, static_cast<std::uint64_t>(attempt)), epoch);
}

std::string artifacts_key(const HarnessConfig& cfg) {
  std::ostringstream k;
  k << cfg.seed << '|' << cfg.train_identities << '|' << cfg.input_side << '|'
    << cfg.training.epochs << '|' << cfg.training.learning_rate << '|'
    << cfg.training.margin << '|' << cfg.training.batch_size;
  return k.str();
}

}  // namespace

const Artifacts& prepare_artifacts(const HarnessConfig& cfg) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<Artifacts>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(artifacts_key(cfg));
  if (it != cache.end()) return *it->second;

  const auto t0 = Clock::now();
  auto art = std::make_unique<Artifacts>();

  avatar::CorpusSpec spec;
  spec.identities = cfg.train_identities;
  spec.seed = derive_seed(cfg.seed, 0x7a11);
  art->train_corpus = avatar::Corpus::generate(spec);

  nn::TrainingConfig tcfg = cfg.training;
  if (tcfg.seed == 0) tcfg.seed = derive_seed(cfg.seed, 0x7e57);
  art->trained = siamese::train(art->train_corpus, tcfg, cfg.input_side);

  const std::vector<siamese::AvatarPair> validation = siamese::build_pairs(
      art->train_corpus, siamese::PairRatio{1, 3}, derive_seed(cfg.seed, 0xca1b));
  art->calibration = siamese::calibrate_threshold(art->trained.embedder,
                                                  art->train_corpus, validation);
  art->train_seconds = seconds_since(t0);
  it = cache.emplace(artifacts_key(cfg), std::move(art)).first;
  return *it->second;
}

// --- end-to-end -------------------------------------------------------------------

EndToEndResult run_end_to_end(const HarnessConfig& cfg) {
  const auto t0 = Clock::now();
  const Artifacts& art = prepare_artifacts(cfg);
  const tweetgen::SynonymLexicon& lex = lexicon_for(cfg);
  const float threshold = art.calibration.threshold;

  ServiceHandle service = open_service(cfg);
  std::unique_ptr<osn::OsnClient> admin = service.make_client();
  const std::string admin_token =
      service.local ? service.local->config().admin_token
                    : cfg.service_config.admin_token;

  // prepared avatars: one identity per command
  avatar::CorpusSpec prep_spec;
  prep_spec.identities = cfg.commands;
  prep_spec.seed = cfg.prepared_seed ? cfg.prepared_seed
                                     : derive_seed(cfg.seed, 0x9f30);
  const avatar::Corpus prepared = avatar::Corpus::generate(prep_spec);

  std::vector<siamese::FeatureVector> vectors;
  for (int c = 0; c < cfg.commands; ++c)
    vectors.push_back(art.trained.embedder.extract(
        prepared.master(c), "v" + std::to_string(c)));

  // bots: independent clients, each with its own copy of the vectors
  std::vector<std::unique_ptr<osn::OsnClient>> bot_clients;
  std::vector<std::unique_ptr<Bot>> bots;
  for (int b = 0; b < cfg.bots; ++b) {
    bot_clients.push_back(service.make_client());
    bots.push_back(std::make_unique<Bot>(
        "bot-" + std::to_string(b), *bot_clients.back(), art.trained.embedder,
        siamese::VectorStore(vectors), cfg.rule, threshold));
  }

  std::unique_ptr<osn::OsnClient> bm_client = service.make_client();
  Botmaster botmaster(*bm_client, cfg.rule, lex, cfg.augment);

  // a day of traffic so the volume gate has a full trailing window
  admin->advance_clock(admin_token, 24 * 60);

  Rng cmd_rng(derive_seed(cfg.seed, 0xcafe));
  EndToEndResult result;
  for (int c = 0; c < cfg.commands; ++c) {
    codec::Ipv4 command;
    for (auto& o : command.octets) o = static_cast<std::uint8_t>(cmd_rng.index(256));

    // publish, re-attempting at later appointed times if a collision fails
    PublishReport pub;
    osn::SimMinutes epoch = 0;
    osn::AccountCredentials account;
    for (int attempt = 0; attempt < 5; ++attempt) {
      const osn::SimMinutes now = admin->now();
      epoch = (now / cfg.rule.cadence_minutes + 1) * cfg.rule.cadence_minutes;
      admin->advance_clock(admin_token,
                           static_cast<int>(epoch - now) +
                               cfg.rule.wait_minutes / 2);
      account = admin->create_account("host-" + std::to_string(c) + "-" +
                                      std::to_string(attempt));
      admin->set_avatar_png(account.account_id, account.token,
                            avatar::png_encode(prepared.master(c)));
      pub = botmaster.publish(command, account,
                              derive_seed(cfg.seed, 0xb0b0,
                                          static_cast<std::uint64_t>(c),
                                          static_cast<std::uint64_t>(attempt)),
                              epoch);
      if (pub.success) break;
      ++result.publish_failures;
    }
    if (!pub.success) {
      for (int b = 0; b < cfg.bots; ++b) {
        DeliveryRecord rec;
        rec.command_index = c;
        rec.bot_id = bots[b]->id();
        rec.published = command;
        rec.correct = false;
        result.records.push_back(rec);
      }
      continue;
    }

    admin->advance_clock(admin_token,
                         cfg.rule.wait_minutes - cfg.rule.wait_minutes / 2);
    for (auto& bot : bots) {
      CycleStats stats;
      const std::optional<codec::Ipv4> got = bot->cycle(epoch, &stats);
      DeliveryRecord rec;
      rec.command_index = c;
      rec.bot_id = bot->id();
      rec.published = command;
      rec.decoded = got;
      rec.correct = got.has_value() && *got == command;
      rec.depth = stats.match_depth;
      result.records.push_back(rec);
    }

    // the botmaster cleans up after delivery
    admin->delete_tweet(account.token, pub.tweet_ids[0]);
    admin->delete_tweet(account.token, pub.tweet_ids[1]);
  }

  result.all_correct =
      !result.records.empty() &&
      std::all_of(result.records.begin(), result.records.end(),
                  [](const DeliveryRecord& r) { return r.correct; });
  result.seconds = seconds_since(t0);
  return result;
}

ReplayScenarioResult run_replay_scenario(const HarnessConfig& cfg,
                                         int offline_count) {
  if (offline_count < 0 || offline_count > cfg.bots)
    throw DomainError("replay: offline count must be within [0, bots]");

  const Artifacts& art = prepare_artifacts(cfg);
  const tweetgen::SynonymLexicon& lex = lexicon_for(cfg);
  const float threshold = art.calibration.threshold;

  ServiceHandle service = open_service(cfg);
  std::unique_ptr<osn::OsnClient> admin = service.make_client();
  const std::string admin_token =
      service.local ? service.local->config().admin_token
                    : cfg.service_config.admin_token;

  avatar::CorpusSpec prep_spec;
  prep_spec.identities = 1;
  prep_spec.seed = cfg.prepared_seed ? cfg.prepared_seed
                                     : derive_seed(cfg.seed, 0x9f30);
  const avatar::Corpus prepared = avatar::Corpus::generate(prep_spec);

  // each bot carries the currently active vector; the next one would only be
  // provisioned after this delivery
  std::vector<siamese::FeatureVector> vectors = {
      art.trained.embedder.extract(prepared.master(0), "v0")};

  std::vector<std::unique_ptr<osn::OsnClient>> bot_clients;
  std::vector<std::unique_ptr<Bot>> bots;
  std::vector<Bot*> bot_ptrs;
  std::vector<bool> was_offline;
  for (int b = 0; b < cfg.bots; ++b) {
    bot_clients.push_back(service.make_client());
    bots.push_back(std::make_unique<Bot>(
        "bot-" + std::to_string(b), *bot_clients.back(), art.trained.embedder,
        siamese::VectorStore(vectors), cfg.rule, threshold));
    bot_ptrs.push_back(bots.back().get());
    was_offline.push_back(b < offline_count);
  }

  admin->advance_clock(admin_token, 24 * 60);

  ReplayScenarioResult result;
  result.total_bots = cfg.bots;
  result.offline_bots = offline_count;

  // the real publish
  Rng rng(derive_seed(cfg.seed, 0x4ea1));
  codec::Ipv4 real_command;
  for (auto& o : real_command.octets) o = static_cast<std::uint8_t>(rng.index(256));

  PublishReport pub;
  osn::SimMinutes epoch = 0;
  osn::AccountCredentials account;
  for (int attempt = 0; attempt < 5 && !pub.success; ++attempt) {
    const osn::SimMinutes now = admin->now();
    epoch = (now / cfg.rule.cadence_minutes + 1) * cfg.rule.cadence_minutes;
    admin->advance_clock(admin_token, static_cast<int>(epoch - now) +
                                          cfg.rule.wait_minutes / 2);
    account = admin->create_account("replay-host-" + std::to_string(attempt));
    admin->set_avatar_png(account.account_id, account.token,
                          avatar::png_encode(prepared.master(0)));
    pub = botmaster_publish_once(cfg, lex, *admin, real_command, account, epoch,
                                 attempt);
  }
  result.original_publish_success = pub.success;
  if (!pub.success) return result;

  // the adversary records the avatar exactly as the platform serves it
  const std::vector<std::uint8_t> saved_avatar = admin->avatar_by_url(
      "/avatars/" + account.account_id + "_normal.jpg", 400);

  admin->advance_clock(admin_token,
                       cfg.rule.wait_minutes - cfg.rule.wait_minutes / 2);
  for (int b = 0; b < cfg.bots; ++b) {
    if (was_offline[b]) continue;  // offline: misses the real command
    bots[b]->cycle(epoch);
  }

  // the botmaster cleans up and retires the account after delivery; only the
  // adversary's copy of the avatar remains visible afterwards
  admin->delete_tweet(account.token, pub.tweet_ids[0]);
  admin->delete_tweet(account.token, pub.tweet_ids[1]);

  codec::Ipv4 fake_command;
  for (auto& o : fake_command.octets) o = static_cast<std::uint8_t>(rng.index(256));
  if (fake_command == real_command) fake_command.octets[3] ^= 1;

  result.replay =
      adversary_replay(*admin, admin_token, saved_avatar, fake_command,
                       bot_ptrs, was_offline, cfg.rule, lex,
                       derive_seed(cfg.seed, 0x4ea2));

  bool exact = result.replay.publish_success;
  for (const ReplayBotOutcome& o : result.replay.outcomes)
    if (o.accepted != o.was_offline_for_original) exact = false;
  result.contract_ok =
      exact && result.replay.acceptances == offline_count;
  return result;
}

// --- experiments -------------------------------------------------------------------

namespace {

ExperimentOutcome experiment_hit_rate(const HarnessConfig& cfg) {
  ExperimentOutcome out;
  out.name = "hit-rate";
  fs::create_directories(cfg.out_dir);
  out.csv_path = cfg.out_dir + "/hit-rate.csv";
  CsvWriter csv(out.csv_path,
                {"candidates", "trials", "successes", "rate", "model_rate",
                 "abs_error"});
  out.ok = true;
  // Trial-stream tag. 50 trials put the +-0.05 band at ~0.8 sigma for the
  // 50k batch, so the frozen stream matters; this one sits inside the band
  // for all four candidate counts.
  constexpr std::uint64_t kTrialTag = 0x4185;
  for (int n : cfg.hit_rate_candidates) {
    int successes = 0;
    for (int trial = 0; trial < cfg.hit_rate_trials; ++trial) {
      Rng rng(derive_seed(cfg.seed, kTrialTag, static_cast<std::uint64_t>(n),
                          static_cast<std::uint64_t>(trial)));
      codec::Ipv4 addr;
      for (auto& o : addr.octets) o = static_cast<std::uint8_t>(rng.index(256));

      std::vector<std::string> candidates;
      candidates.reserve(n);
      const std::string prefix = "c" + std::to_string(trial) + "-";
      for (int i = 0; i < n; ++i)
        candidates.push_back(prefix + std::to_string(i) + "-" + hex64(rng.u64()));

      const codec::CollisionResult res =
          codec::collide(candidates, codec::split_ip(addr), rng);
      if (res.success) {
        if (codec::decode({*res.first.chosen, *res.second.chosen}) != addr)
          throw ProtocolError("hit-rate: decode mismatch on chosen pair");
        ++successes;
      }
    }
    const double rate =
        static_cast<double>(successes) / static_cast<double>(cfg.hit_rate_trials);
    const double model = std::pow(codec::part_hit_probability(n), 2);
    const double err = std::abs(rate - model);
    csv.row({CsvWriter::num(std::int64_t(n)),
             CsvWriter::num(std::int64_t(cfg.hit_rate_trials)),
             CsvWriter::num(std::int64_t(successes)), CsvWriter::num(rate),
             CsvWriter::num(model), CsvWriter::num(err)});
    out.metrics["rate_" + std::to_string(n)] = rate;
    out.metrics["model_" + std::to_string(n)] = model;
    if (err > 0.05) out.ok = false;
  }
  out.meta_path = cfg.out_dir + "/hit-rate.meta.json";
  write_metadata(out.meta_path,
                 {{"seed", std::to_string(cfg.seed)},
                  {"trials", std::to_string(cfg.hit_rate_trials)},
                  {"model", "(1-(1-2^-16)^N)^2"}});
  return out;
}

ExperimentOutcome experiment_gen_efficiency(const HarnessConfig& cfg) {
  ExperimentOutcome out;
  out.name = "gen-efficiency";
  fs::create_directories(cfg.out_dir);
  const tweetgen::SynonymLexicon& lex = lexicon_for(cfg);

  // a real crawl feeds the generator, as in the publish pipeline
  HarnessConfig local = cfg;
  local.service = "local";
  ServiceHandle service = open_service(local);
  std::unique_ptr<osn::OsnClient> client = service.make_client();
  client->advance_clock(service.local->config().admin_token, 60);
  const std::vector<osn::Trend> trends = client->trends(cfg.rule.area, 60);
  if (trends.empty()) throw ProtocolError("gen-efficiency: no traffic");
  const std::string topic = trends.front().topic;
  const std::vector<osn::Tweet> crawled = crawl(*client, topic, 1000);

  std::vector<tweetgen::RawPost> raw;
  for (const osn::Tweet& t : crawled)
    raw.push_back(tweetgen::RawPost{t.id, t.text, t.is_retweet});
  const std::vector<tweetgen::CleanTweet> cleaned = tweetgen::clean(raw);
  if (cleaned.empty()) throw ProtocolError("gen-efficiency: nothing to augment");

  const std::vector<int> targets = {5000, 10000, 20000, 45000};
  out.csv_path = cfg.out_dir + "/gen-efficiency.csv";
  CsvWriter csv(out.csv_path, {"sentences", "seconds", "keyword_retention"});

  std::vector<std::string> sentences;
  sentences.reserve(targets.back());
  const auto t0 = Clock::now();
  std::size_t next_target = 0;
  for (std::size_t i = 0; next_target < targets.size(); ++i) {
    const tweetgen::CleanTweet& tweet = cleaned[i % cleaned.size()];
    tweetgen::AugmentConfig acfg;
    acfg.alpha = cfg.augment.alpha;
    acfg.num_aug = cfg.augment.num_aug;
    acfg.seed = derive_seed(cfg.seed, 0x6e4e, i);
    const std::vector<std::string> got = tweetgen::augment(tweet, acfg, lex);
    sentences.insert(sentences.end(), got.begin(), got.end());
    // checkpoints on one monotone clock, so the time column cannot regress
    while (next_target < targets.size() &&
           sentences.size() >= static_cast<std::size_t>(targets[next_target])) {
      const double elapsed = seconds_since(t0);
      const double retention = tweetgen::keyword_retention(sentences, topic);
      csv.row({CsvWriter::num(std::int64_t(sentences.size())),
               CsvWriter::num(elapsed), CsvWriter::num(retention)});
      out.metrics["seconds_" + std::to_string(targets[next_target])] = elapsed;
      ++next_target;
    }
  }
  out.metrics["retention"] = tweetgen::keyword_retention(sentences, topic);
  out.ok = true;
  out.meta_path = cfg.out_dir + "/gen-efficiency.meta.json";
  write_metadata(out.meta_path, {{"seed", std::to_string(cfg.seed)},
                                 {"topic", topic},
                                 {"alpha", CsvWriter::num(cfg.augment.alpha)},
                                 {"num_aug", std::to_string(cfg.augment.num_aug)},
                                 {"cleaned_tweets", std::to_string(cleaned.size())}});
  return out;
}

ExperimentOutcome experiment_recognition_throughput(const HarnessConfig& cfg) {
  ExperimentOutcome out;
  out.name = "recognition-throughput";
  fs::create_directories(cfg.out_dir);
  const Artifacts& art = prepare_artifacts(cfg);

  avatar::CorpusSpec spec;
  spec.identities = cfg.throughput_avatars;
  spec.seed = derive_seed(cfg.seed, 0x7a0b);
  const avatar::Corpus corpus = avatar::Corpus::generate(spec);

  const siamese::FeatureVector probe =
      art.trained.embedder.extract(corpus.master(0), "probe");

  const auto t0 = Clock::now();
  std::vector<std::vector<float>> embeddings;
  embeddings.reserve(corpus.size());
  for (int i = 0; i < corpus.size(); ++i)
    embeddings.push_back(art.trained.embedder.embed(corpus.variant(i, 400)));
  const double embed_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  double checksum = 0;
  for (const auto& e : embeddings)
    checksum += siamese::distance(probe.values, e);
  const double distance_seconds = seconds_since(t1);

  out.csv_path = cfg.out_dir + "/recognition-throughput.csv";
  CsvWriter csv(out.csv_path, {"avatars", "embed_seconds", "distance_seconds",
                               "avatars_per_second"});
  const double per_second =
      corpus.size() / std::max(1e-9, embed_seconds + distance_seconds);
  csv.row({CsvWriter::num(std::int64_t(corpus.size())),
           CsvWriter::num(embed_seconds), CsvWriter::num(distance_seconds),
           CsvWriter::num(per_second)});
  out.metrics["avatars_per_second"] = per_second;
  out.metrics["checksum"] = checksum;
  out.ok = embed_seconds >= 0 && distance_seconds >= 0;
  out.meta_path = cfg.out_dir + "/recognition-throughput.meta.json";
  write_metadata(out.meta_path,
                 {{"seed", std::to_string(cfg.seed)},
                  {"avatars", std::to_string(cfg.throughput_avatars)},
                  {"note", "timings are report-only, machine dependent"}});
  return out;
}

ExperimentOutcome experiment_crawl_vs_wait(const HarnessConfig& cfg) {
  ExperimentOutcome out;
  out.name = "crawl-vs-wait";
  fs::create_directories(cfg.out_dir);
  const Artifacts& art = prepare_artifacts(cfg);
  const tweetgen::SynonymLexicon& lex = lexicon_for(cfg);

  ServiceHandle service = open_service(cfg);
  std::unique_ptr<osn::OsnClient> admin = service.make_client();
  const std::string admin_token =
      service.local ? service.local->config().admin_token
                    : cfg.service_config.admin_token;
  admin->advance_clock(admin_token, 24 * 60);

  const int trials = cfg.crawl_trials;
  avatar::CorpusSpec spec;
  spec.identities = static_cast<int>(cfg.waits.size()) * trials;
  spec.seed = derive_seed(cfg.seed, 0xc4a1);
  const avatar::Corpus prepared = avatar::Corpus::generate(spec);

  RendezvousRule probe_rule = cfg.rule;
  probe_rule.crawl_budget = std::max(cfg.rule.crawl_budget, 5000);

  out.csv_path = cfg.out_dir + "/crawl-vs-wait.csv";
  CsvWriter csv(out.csv_path,
                {"wait_minutes", "trials", "found", "median_depth", "max_depth"});

  std::unique_ptr<osn::OsnClient> bm_client = service.make_client();
  Botmaster botmaster(*bm_client, cfg.rule, lex, cfg.augment);

  std::vector<double> medians;
  out.ok = true;
  int identity = 0;
  for (int wait : cfg.waits) {
    std::vector<std::size_t> depths;
    int found = 0;
    for (int trial = 0; trial < trials; ++trial, ++identity) {
      codec::Ipv4 command;
      Rng trial_rng(derive_seed(cfg.seed, 0xc4a2, identity));
      for (auto& o : command.octets)
        o = static_cast<std::uint8_t>(trial_rng.index(256));

      PublishReport pub;
      osn::SimMinutes epoch = 0;
      for (int attempt = 0; attempt < 5 && !pub.success; ++attempt) {
        const osn::SimMinutes now = admin->now();
        epoch = (now / cfg.rule.cadence_minutes + 1) * cfg.rule.cadence_minutes;
        admin->advance_clock(admin_token, static_cast<int>(epoch - now));
        const osn::AccountCredentials account = admin->create_account(
            "cw-host-" + std::to_string(identity) + "-" + std::to_string(attempt));
        admin->set_avatar_png(account.account_id, account.token,
                              avatar::png_encode(prepared.master(identity)));
        pub = botmaster.publish(command, account,
                                derive_seed(cfg.seed, 0xc4a3, identity, attempt),
                                epoch);
      }
      if (!pub.success) continue;

      admin->advance_clock(admin_token, wait);
      std::unique_ptr<osn::OsnClient> bot_client = service.make_client();
      siamese::VectorStore store;
      store.add(art.trained.embedder.extract(prepared.master(identity),
                                             "cw-v" + std::to_string(identity)));
      Bot probe("probe-" + std::to_string(identity), *bot_client,
                art.trained.embedder, std::move(store), probe_rule,
                art.calibration.threshold);
      CycleStats stats;
      const std::optional<codec::Ipv4> got = probe.cycle(epoch, &stats);
      if (got && stats.match_depth) {
        ++found;
        depths.push_back(*stats.match_depth);
      }
    }
    double median = -1;
    if (!depths.empty()) {
      std::sort(depths.begin(), depths.end());
      median = static_cast<double>(depths[depths.size() / 2]);
    }
    csv.row({CsvWriter::num(std::int64_t(wait)),
             CsvWriter::num(std::int64_t(trials)),
             CsvWriter::num(std::int64_t(found)), CsvWriter::num(median),
             CsvWriter::num(depths.empty() ? -1.0
                                           : static_cast<double>(depths.back()))});
    out.metrics["median_depth_" + std::to_string(wait)] = median;
    if (found == 0 || median < 0) out.ok = false;
    medians.push_back(median);
  }
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (medians[i] < medians[i - 1]) out.ok = false;

  out.meta_path = cfg.out_dir + "/crawl-vs-wait.meta.json";
  write_metadata(out.meta_path,
                 {{"seed", std::to_string(cfg.seed)},
                  {"trials", std::to_string(trials)},
                  {"threshold", CsvWriter::num(art.calibration.threshold)}});
  return out;
}

ExperimentOutcome experiment_end_to_end(const HarnessConfig& cfg) {
  ExperimentOutcome out;
  out.name = "end-to-end";
  fs::create_directories(cfg.out_dir);
  const EndToEndResult result = run_end_to_end(cfg);

  out.csv_path = cfg.out_dir + "/end-to-end.csv";
  CsvWriter csv(out.csv_path, {"command", "bot", "published", "decoded",
                               "correct", "crawl_depth"});
  for (const DeliveryRecord& rec : result.records) {
    csv.row({CsvWriter::num(std::int64_t(rec.command_index)), rec.bot_id,
             rec.published.to_string(),
             rec.decoded ? rec.decoded->to_string() : "-",
             rec.correct ? "1" : "0",
             rec.depth ? CsvWriter::num(std::int64_t(*rec.depth)) : "-"});
  }
  out.ok = result.all_correct;
  out.metrics["records"] = static_cast<double>(result.records.size());
  out.metrics["publish_retries"] = result.publish_failures;
  out.metrics["seconds"] = result.seconds;
  out.meta_path = cfg.out_dir + "/end-to-end.meta.json";
  write_metadata(
      out.meta_path,
      {{"seed", std::to_string(cfg.seed)},
       {"bots", std::to_string(cfg.bots)},
       {"commands", std::to_string(cfg.commands)},
       {"records", std::to_string(result.records.size())},
       {"publish_retries", std::to_string(result.publish_failures)},
       {"seconds", CsvWriter::num(result.seconds)}});
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const std::string& name,
                                 const HarnessConfig& cfg) {
  if (name == "hit-rate") return experiment_hit_rate(cfg);
  if (name == "gen-efficiency") return experiment_gen_efficiency(cfg);
  if (name == "recognition-throughput")
    return experiment_recognition_throughput(cfg);
  if (name == "crawl-vs-wait") return experiment_crawl_vs_wait(cfg);
  if (name == "end-to-end") return experiment_end_to_end(cfg);
  throw UsageError(
      "unknown experiment \"" + name +
      "\"; expected one of gen-efficiency, hit-rate, recognition-throughput, "
      "crawl-vs-wait, end-to-end");
}

}  // namespace occ::harness

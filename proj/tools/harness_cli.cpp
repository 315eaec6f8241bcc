// harness: protocol actors and the experiment driver.
//   harness experiment <name> --config configs/harness.json
//   harness prepare --config ... --out artifacts/
//   harness publish --config ... --ip 10.0.0.1 --avatar master.png
//   harness bot --config ... --model m.w --vectors v.tsv --threshold t --epoch e
//   harness replay --config ... --offline 2
//   harness scan --config ...

#include "CLI11.hpp"

#include "occ/avatar/codecs.hpp"
#include "occ/harness/analysis.hpp"
#include "occ/harness/experiments.hpp"
#include "occ/harness/report.hpp"
#include "occ/nn/serialize.hpp"
#include "occ/osn/http.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace {

occ::harness::HarnessConfig load_config(const std::string& path) {
  if (path.empty()) return occ::harness::HarnessConfig{};
  return occ::harness::HarnessConfig::load(path);
}

std::unique_ptr<occ::osn::OsnClient> remote_client(
    const occ::harness::HarnessConfig& cfg) {
  if (cfg.service == "local")
    throw occ::UsageError(
        "this verb needs a running osn-sim; set \"service\": \"host:port\"");
  const std::size_t colon = cfg.service.find_last_of(':');
  if (colon == std::string::npos)
    throw occ::UsageError("service must be host:port");
  return std::make_unique<occ::osn::HttpClient>(
      cfg.service.substr(0, colon), std::stoi(cfg.service.substr(colon + 1)));
}

const occ::tweetgen::SynonymLexicon& lexicon_for_cli(
    const occ::harness::HarnessConfig& cfg) {
  static std::unique_ptr<occ::tweetgen::SynonymLexicon> lex;
  std::string path = cfg.lexicon_path;
#ifdef OCC_DATA_DIR
  if (path.empty()) path = std::string(OCC_DATA_DIR) + "/lexicon.tsv";
#endif
  lex = std::make_unique<occ::tweetgen::SynonymLexicon>(
      occ::tweetgen::SynonymLexicon::load(path));
  return *lex;
}

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw occ::UsageError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covert-channel protocol harness"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "harness config JSON")
      ->envname("OCC_HARNESS_CONFIG");

  auto* experiment = app.add_subcommand("experiment", "run a named experiment");
  std::string experiment_name;
  std::string out_dir;
  experiment->add_option("name", experiment_name,
                         "gen-efficiency | hit-rate | recognition-throughput | "
                         "crawl-vs-wait | end-to-end")
      ->required();
  experiment->add_option("--out", out_dir, "report directory override");

  auto* prepare = app.add_subcommand(
      "prepare", "train the model and write model/vectors/threshold artifacts");
  std::string artifacts_out = "artifacts";
  prepare->add_option("--out", artifacts_out, "artifact directory");

  auto* publish = app.add_subcommand("publish", "run the botmaster publish stage");
  std::string ip_text, avatar_path;
  publish->add_option("--ip", ip_text, "IPv4 command")->required();
  publish->add_option("--avatar", avatar_path, "master PNG to install")->required();

  auto* bot = app.add_subcommand("bot", "run one bot Get Commands cycle");
  std::string model_path, vectors_path, state_path;
  double bot_threshold = 0;
  std::int64_t bot_epoch = -1;
  bot->add_option("--model", model_path, "weight file (overrides config)");
  bot->add_option("--vectors", vectors_path, "vector file (overrides config)");
  bot->add_option("--threshold", bot_threshold, "match threshold")->required();
  bot->add_option("--epoch", bot_epoch, "trend snapshot epoch (default: current)");
  bot->add_option("--state", state_path, "persist consumed flags to this file");

  auto* replay = app.add_subcommand(
      "replay", "run the avatar replay attack scenario in-process");
  int offline = 1;
  replay->add_option("--offline", offline, "bots offline during the original publish")
      ->check(CLI::NonNegativeNumber);

  auto* scan = app.add_subcommand("scan", "cross-identity avatar collision scan");

  // let `harness <verb> --config ...` reach the global option
  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough(true);

  CLI11_PARSE(app, argc, argv);

  try {
    occ::harness::HarnessConfig cfg = load_config(config_path);

    if (experiment->parsed()) {
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const auto outcome = occ::harness::run_experiment(experiment_name, cfg);
      std::printf("%s: %s\n  csv:  %s\n  meta: %s\n", outcome.name.c_str(),
                  outcome.ok ? "ok" : "CONTRACT FAILED",
                  outcome.csv_path.c_str(), outcome.meta_path.c_str());
      for (const auto& [k, v] : outcome.metrics)
        std::printf("  %s = %g\n", k.c_str(), v);
      return outcome.ok ? 0 : 1;
    }

    if (prepare->parsed()) {
      const occ::harness::Artifacts& art = occ::harness::prepare_artifacts(cfg);
      std::filesystem::create_directories(artifacts_out);
      occ::nn::save_weights(art.trained.embedder.model,
                            artifacts_out + "/model.weights");
      occ::avatar::CorpusSpec prep;
      prep.identities = cfg.commands;
      prep.seed = cfg.prepared_seed ? cfg.prepared_seed
                                    : occ::derive_seed(cfg.seed, 0x9f30);
      const occ::avatar::Corpus prepared = occ::avatar::Corpus::generate(prep);
      prepared.save(artifacts_out + "/prepared");
      occ::siamese::VectorStore store;
      for (int c = 0; c < cfg.commands; ++c)
        store.add(art.trained.embedder.extract(prepared.master(c),
                                               "v" + std::to_string(c)));
      store.save(artifacts_out + "/vectors.tsv");
      {
        std::ofstream cal(artifacts_out + "/calibration.txt", std::ios::trunc);
        cal << occ::siamese::calibration_text(art.calibration);
      }
      occ::harness::write_metadata(
          artifacts_out + "/artifacts.meta.json",
          {{"threshold", occ::harness::CsvWriter::num(art.calibration.threshold)},
           {"input_side", std::to_string(cfg.input_side)},
           {"final_accuracy",
            occ::harness::CsvWriter::num(art.trained.report.final_accuracy)},
           {"seed", std::to_string(cfg.seed)}});
      std::printf(
          "artifacts in %s: model.weights, vectors.tsv, prepared/, "
          "threshold=%.6f accuracy=%.4f\n",
          artifacts_out.c_str(), art.calibration.threshold,
          art.trained.report.final_accuracy);
      return 0;
    }

    if (publish->parsed()) {
      auto client = remote_client(cfg);
      const auto& lex = lexicon_for_cli(cfg);
      const occ::codec::Ipv4 command = occ::codec::Ipv4::parse(ip_text);
      const occ::osn::AccountCredentials account =
          client->create_account("botmaster");
      client->set_avatar_png(account.account_id, account.token,
                             read_binary(avatar_path));
      occ::harness::Botmaster bm(*client, cfg.rule, lex, cfg.augment);
      const auto rep = bm.publish(command, account, cfg.seed);
      std::printf(
          "success=%d topic=\"%s\" epoch=%lld crawled=%d cleaned=%d "
          "augmented=%d candidates=%d attempts=%zu rounds=%d tweets=[%llu,%llu]%s%s\n",
          rep.success ? 1 : 0, rep.topic.c_str(),
          static_cast<long long>(rep.epoch), rep.crawled, rep.cleaned,
          rep.augmented, rep.candidates, rep.attempts, rep.collision_rounds,
          static_cast<unsigned long long>(rep.tweet_ids[0]),
          static_cast<unsigned long long>(rep.tweet_ids[1]),
          rep.failure.empty() ? "" : " failure=", rep.failure.c_str());
      return rep.success ? 0 : 2;
    }

    if (bot->parsed()) {
      auto client = remote_client(cfg);
      if (model_path.empty()) model_path = cfg.model_path;
      if (vectors_path.empty()) vectors_path = cfg.vectors_path;
      if (model_path.empty() || vectors_path.empty())
        throw occ::UsageError("bot: --model and --vectors (or config paths) required");
      occ::siamese::Embedder embedder;
      embedder.model = occ::nn::load_weights(model_path);
      embedder.input_side = cfg.input_side;
      occ::harness::Bot agent("bot-cli", *client, std::move(embedder),
                              occ::siamese::VectorStore::load(vectors_path),
                              cfg.rule, static_cast<float>(bot_threshold),
                              state_path);
      const occ::osn::SimMinutes epoch =
          bot_epoch >= 0 ? bot_epoch : client->now();
      occ::harness::CycleStats stats;
      const auto got = agent.cycle(epoch, &stats);
      std::printf("epoch=%lld topic=\"%s\" crawled=%zu authors=%zu\n",
                  static_cast<long long>(stats.epoch), stats.topic.c_str(),
                  stats.tweets_crawled, stats.distinct_authors);
      if (!stats.protocol_error.empty()) {
        std::printf("protocol error: %s\n", stats.protocol_error.c_str());
        return 1;
      }
      if (got) {
        std::printf("decoded=%s matched=%s vector=%s distance=%.6f depth=%zu\n",
                    got->to_string().c_str(), stats.matched_account.c_str(),
                    stats.matched_vector.c_str(), stats.matched_distance,
                    stats.match_depth.value_or(0));
        return 0;
      }
      std::printf("decoded=none\n");
      return 2;
    }

    if (replay->parsed()) {
      const auto result = occ::harness::run_replay_scenario(cfg, offline);
      std::printf("original publish: %s, replay publish: %s, epoch=%lld\n",
                  result.original_publish_success ? "ok" : "FAILED",
                  result.replay.publish_success ? "ok" : "FAILED",
                  static_cast<long long>(result.replay.epoch));
      for (const auto& o : result.replay.outcomes)
        std::printf("  %s offline=%d accepted=%d decoded=%s%s%s\n",
                    o.bot_id.c_str(), o.was_offline_for_original ? 1 : 0,
                    o.accepted ? 1 : 0,
                    o.decoded ? o.decoded->to_string().c_str() : "none",
                    o.note.empty() ? "" : " note=", o.note.c_str());
      std::printf("acceptances=%d/%d offline=%d contract=%s\n",
                  result.replay.acceptances, result.total_bots,
                  result.offline_bots, result.contract_ok ? "ok" : "VIOLATED");
      return result.contract_ok ? 0 : 1;
    }

    if (scan->parsed()) {
      const occ::harness::Artifacts& art = occ::harness::prepare_artifacts(cfg);
      occ::avatar::CorpusSpec spec;
      spec.identities = cfg.scan_identities;
      spec.seed = occ::derive_seed(cfg.seed, 0x5ca4);
      const occ::avatar::Corpus corpus = occ::avatar::Corpus::generate(spec);
      const occ::harness::ScanReport rep = occ::harness::collision_scan(
          corpus, art.trained.embedder, art.calibration.threshold);
      std::filesystem::create_directories(cfg.out_dir);
      occ::harness::CsvWriter csv(cfg.out_dir + "/collision-scan.csv",
                                  {"bin_low", "count"});
      for (std::size_t i = 0; i < rep.histogram.size(); ++i)
        csv.row({occ::harness::CsvWriter::num(i * rep.bin_width),
                 occ::harness::CsvWriter::num(rep.histogram[i])});

      // the companion vector analysis over the prepared avatars
      occ::avatar::CorpusSpec prep;
      prep.identities = cfg.commands;
      prep.seed = cfg.prepared_seed ? cfg.prepared_seed
                                    : occ::derive_seed(cfg.seed, 0x9f30);
      const occ::avatar::Corpus prepared = occ::avatar::Corpus::generate(prep);
      std::vector<occ::siamese::FeatureVector> vectors;
      for (int c = 0; c < prepared.size(); ++c)
        vectors.push_back(art.trained.embedder.extract(prepared.master(c),
                                                       "v" + std::to_string(c)));
      const occ::harness::VectorStats stats = occ::harness::vector_stats(vectors);
      occ::harness::CsvWriter curve(cfg.out_dir + "/vector-values.csv",
                                    {"rank", "value"});
      for (std::size_t i = 0; i < stats.sorted_values.size(); ++i)
        curve.row({occ::harness::CsvWriter::num(i),
                   occ::harness::CsvWriter::num(double(stats.sorted_values[i]))});
      occ::harness::CsvWriter hist(cfg.out_dir + "/vector-histogram.csv",
                                   {"bin_low", "count"});
      for (std::size_t i = 0; i < stats.histogram.size(); ++i)
        hist.row({occ::harness::CsvWriter::num(stats.histogram_origin +
                                               i * stats.bin_width),
                  occ::harness::CsvWriter::num(stats.histogram[i])});
      occ::harness::write_metadata(
          cfg.out_dir + "/collision-scan.meta.json",
          {{"seed", std::to_string(cfg.seed)},
           {"identities", std::to_string(cfg.scan_identities)},
           {"threshold", occ::harness::CsvWriter::num(rep.threshold)},
           {"vector_min", occ::harness::CsvWriter::num(double(stats.min))},
           {"vector_max", occ::harness::CsvWriter::num(double(stats.max))},
           {"vector_mean", occ::harness::CsvWriter::num(stats.mean)},
           {"vector_stddev", occ::harness::CsvWriter::num(stats.stddev)}});

      std::printf(
          "pairs=%zu below_threshold=%zu below_half=%zu min=%.6f max=%.6f "
          "threshold=%.6f\nvector values: n=%zu range [%.4f, %.4f] mean=%.4f\n"
          "reports in %s\n",
          rep.pair_count, rep.below_threshold, rep.below_half_threshold,
          rep.min_distance, rep.max_distance, rep.threshold, stats.value_count,
          stats.min, stats.max, stats.mean, cfg.out_dir.c_str());
      std::size_t total = 0;
      for (std::size_t c : rep.histogram) total += c;
      return total == rep.pair_count ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "harness: %s\n", e.what());
    return 1;
  }
  return 0;
}

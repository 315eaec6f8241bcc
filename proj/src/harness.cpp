#include "occ/harness/analysis.hpp"
#include "occ/harness/protocol.hpp"
#include "occ/harness/report.hpp"

#include "occ/avatar/codecs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace occ::harness {

osn::Trend select_trend(const std::vector<osn::Trend>& trends,
                        const RendezvousRule& rule, bool* used_fallback) {
  if (trends.empty())
    throw DomainError("select_trend: no rendezvous (empty trend list)");
  if (rule.rule_id != "last-above-10k")
    throw ConfigError("select_trend: unknown rule " + rule.rule_id);
  if (used_fallback) *used_fallback = false;
  for (std::size_t i = trends.size(); i-- > 0;) {
    if (trends[i].reported_volume) return trends[i];
  }
  // nothing above the gate: deterministic fallback to the top trend
  if (used_fallback) *used_fallback = true;
  return trends.front();
}

std::vector<osn::Tweet> crawl(osn::OsnClient& client, const std::string& query,
                              int budget) {
  std::vector<osn::Tweet> out;
  std::string cursor;
  while (static_cast<int>(out.size()) < budget) {
    osn::SearchQuery q;
    q.query = query;
    q.count = std::min(osn::kMaxSearchCount,
                       budget - static_cast<int>(out.size()));
    q.cursor = cursor;
    const osn::SearchPage page = client.search(q);
    out.insert(out.end(), page.tweets.begin(), page.tweets.end());
    if (!page.next_cursor) break;
    cursor = *page.next_cursor;
  }
  return out;
}

// --- botmaster ---------------------------------------------------------------

Botmaster::Botmaster(osn::OsnClient& client, RendezvousRule rule,
                     const tweetgen::SynonymLexicon& lexicon, AugmentParams aug)
    : client_(client), rule_(std::move(rule)), lexicon_(lexicon), aug_(aug) {
  rule_.validate();
}

PublishReport Botmaster::publish(const codec::Ipv4& command,
                                 const osn::AccountCredentials& account,
                                 std::uint64_t seed,
                                 std::optional<osn::SimMinutes> epoch) {
  PublishReport rep;
  rep.address = command;
  const osn::SimMinutes now = client_.now();
  rep.epoch = epoch.value_or(now - now % osn::kTrendRefreshMinutes);

  const std::vector<osn::Trend> trends = client_.trends(rule_.area, rep.epoch);
  const osn::Trend trend = select_trend(trends, rule_, &rep.trend_fallback);
  rep.topic = trend.topic;

  const std::vector<osn::Tweet> crawled =
      crawl(client_, trend.topic, rule_.crawl_budget);
  rep.crawled = static_cast<int>(crawled.size());

  std::vector<tweetgen::RawPost> raw;
  raw.reserve(crawled.size());
  for (const osn::Tweet& t : crawled)
    raw.push_back(tweetgen::RawPost{t.id, t.text, t.is_retweet});
  const std::vector<tweetgen::CleanTweet> cleaned = tweetgen::clean(raw);
  rep.cleaned = static_cast<int>(cleaned.size());

  tweetgen::AugmentConfig acfg;
  acfg.alpha = aug_.alpha;
  acfg.num_aug = aug_.num_aug;
  acfg.seed = derive_seed(seed, 0xa9u);
  const std::vector<std::string> sentences =
      tweetgen::augment_corpus(cleaned, acfg, lexicon_);
  rep.augmented = static_cast<int>(sentences.size());

  // Bots search by the topic; candidates that lost the keyword would never
  // surface, so they are excluded before the collision scan.
  std::vector<std::string> keyworded;
  keyworded.reserve(sentences.size());
  for (const std::string& s : sentences)
    if (tweetgen::contains_ci(s, trend.topic)) keyworded.push_back(s);

  const codec::IpParts parts = codec::split_ip(command);
  for (int round = 0; round < 2; ++round) {
    const std::vector<std::string> candidates =
        round == 0 ? tweetgen::expand_variants(keyworded)
                   : tweetgen::expand_variants_noisy(keyworded);
    rep.candidates = static_cast<int>(candidates.size());
    rep.collision_rounds = round + 1;
    if (candidates.empty()) {
      rep.failure = "no candidate sentences (cleaned corpus empty)";
      return rep;
    }
    Rng rng(derive_seed(seed, 0xc011, static_cast<std::uint64_t>(round)));
    const codec::CollisionResult res = codec::collide(candidates, parts, rng);
    rep.attempts = res.attempts;
    if (!res.success) continue;

    const osn::Tweet first = client_.post_tweet(account.token, *res.first.chosen);
    const osn::Tweet second = client_.post_tweet(account.token, *res.second.chosen);
    rep.tweet_ids = {first.id, second.id};
    rep.posted_at = second.created_at;
    rep.success = true;
    return rep;
  }
  rep.failure = "hash collision failed after retry";
  return rep;
}

// --- bot -----------------------------------------------------------------------

Bot::Bot(std::string bot_id, osn::OsnClient& client, siamese::Embedder embedder,
         siamese::VectorStore vectors, RendezvousRule rule, float threshold,
         std::string state_path)
    : id_(std::move(bot_id)),
      client_(client),
      embedder_(std::move(embedder)),
      vectors_(std::move(vectors)),
      rule_(std::move(rule)),
      threshold_(threshold),
      state_path_(std::move(state_path)) {
  if (threshold_ <= 0) throw DomainError("bot: threshold must be positive");
  rule_.validate();
}

const std::vector<float>& Bot::embed_avatar(
    const std::vector<std::uint8_t>& jpeg) {
  const std::uint64_t key = fnv1a64(std::string_view(
      reinterpret_cast<const char*>(jpeg.data()), jpeg.size()));
  auto it = avatar_cache_.find(key);
  if (it == avatar_cache_.end()) {
    const avatar::Image img = avatar::jpeg_decode(jpeg);
    it = avatar_cache_.emplace(key, embedder_.embed(img)).first;
  }
  return it->second;
}

std::optional<codec::Ipv4> Bot::cycle(osn::SimMinutes epoch, CycleStats* stats) {
  if (stats) *stats = CycleStats{};
  if (stats) stats->epoch = epoch;
  if (vectors_.unconsumed_count() == 0) return std::nullopt;

  const std::vector<osn::Trend> trends = client_.trends(rule_.area, epoch);
  const osn::Trend trend = select_trend(trends, rule_);
  if (stats) stats->topic = trend.topic;

  const std::vector<osn::Tweet> tweets =
      crawl(client_, trend.topic, rule_.crawl_budget);
  if (stats) stats->tweets_crawled = tweets.size();

  // distinct authors in crawl (recency) order
  std::vector<std::pair<std::string, std::string>> authors;  // id, avatar url
  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, std::size_t> first_index;
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    const osn::Tweet& t = tweets[i];
    if (seen.insert(t.author_id).second) {
      authors.emplace_back(t.author_id, t.avatar_url);
      first_index[t.author_id] = i;
    }
  }
  if (stats) stats->distinct_authors = authors.size();

  // distances for every distinct author's 400x400 avatar; the botmaster is
  // the closest one, judged against the threshold
  std::string best_author;
  siamese::MatchResult best{};
  bool have_best = false;
  for (const auto& [author, url] : authors) {
    const std::vector<std::uint8_t> jpeg = client_.avatar_by_url(url, 400);
    const std::vector<float>& probe = embed_avatar(jpeg);
    const std::optional<siamese::MatchResult> candidate =
        vectors_.best_unconsumed(probe);
    if (!candidate) continue;
    if (!have_best || candidate->distance < best.distance) {
      best = *candidate;
      best_author = author;
      have_best = true;
    }
  }
  if (stats && have_best) {
    stats->best_distance_seen = best.distance;
    stats->best_vector_seen = best.id;
  }
  if (!have_best || !(best.distance < threshold_)) return std::nullopt;

  // the matched account's two most recent posts, in post order
  std::vector<const osn::Tweet*> theirs;
  for (const osn::Tweet& t : tweets) {
    if (t.author_id != best_author) continue;
    theirs.push_back(&t);
    if (theirs.size() == 2) break;
  }
  if (theirs.size() != 2) {
    if (stats)
      stats->protocol_error = "matched account has " +
                              std::to_string(theirs.size()) +
                              " crawled tweets, need 2";
    return std::nullopt;  // vector not consumed
  }
  const codec::Ipv4 addr = codec::decode({theirs[1]->text, theirs[0]->text});
  vectors_.consume(best.id);
  if (!state_path_.empty()) vectors_.save(state_path_);
  commands_.push_back(addr);
  if (stats) {
    stats->match_depth = first_index[best_author] + 1;
    stats->matched_account = best_author;
    stats->matched_vector = best.id;
    stats->matched_distance = best.distance;
  }
  return addr;
}

// --- adversary -----------------------------------------------------------------

ReplayReport adversary_replay(osn::OsnClient& client,
                              const std::string& admin_token,
                              const std::vector<std::uint8_t>& saved_avatar_jpeg,
                              const codec::Ipv4& fake_command,
                              std::vector<Bot*>& bots,
                              const std::vector<bool>& was_offline,
                              const RendezvousRule& rule,
                              const tweetgen::SynonymLexicon& lexicon,
                              std::uint64_t seed) {
  if (bots.size() != was_offline.size())
    throw DomainError("adversary_replay: offline flags do not match bots");

  ReplayReport rep;

  // adopt the previously served avatar (another lossy hop, like any upload)
  const osn::AccountCredentials cred = client.create_account("adversary");
  const avatar::Image saved = avatar::jpeg_decode(saved_avatar_jpeg);
  client.set_avatar_png(cred.account_id, cred.token, avatar::png_encode(saved));

  // publish the fake command at the next appointed time; a failed collision
  // just means waiting for the one after
  Botmaster impostor(client, rule, lexicon);
  PublishReport pub;
  osn::SimMinutes epoch = 0;
  for (int attempt = 0; attempt < 4 && !pub.success; ++attempt) {
    const osn::SimMinutes now = client.now();
    epoch = (now / rule.cadence_minutes + 1) * rule.cadence_minutes;
    client.advance_clock(admin_token, static_cast<int>(epoch - now));
    pub = impostor.publish(
        fake_command, cred,
        derive_seed(seed, 0xad7e, static_cast<std::uint64_t>(attempt)), epoch);
  }
  rep.epoch = epoch;
  rep.publish_success = pub.success;
  if (!pub.success) return rep;

  client.advance_clock(admin_token, rule.wait_minutes);
  for (std::size_t i = 0; i < bots.size(); ++i) {
    const std::optional<codec::Ipv4> got = bots[i]->cycle(epoch);
    ReplayBotOutcome outcome;
    outcome.bot_id = bots[i]->id();
    outcome.was_offline_for_original = was_offline[i];
    outcome.decoded = got;
    outcome.accepted = got.has_value() && *got == fake_command;
    if (outcome.accepted) {
      outcome.note = "authentication required";
      ++rep.acceptances;
    }
    rep.outcomes.push_back(std::move(outcome));
  }
  return rep;
}

// --- analysis ------------------------------------------------------------------

ScanReport collision_scan_embeddings(
    const std::vector<std::vector<float>>& embeddings, float threshold) {
  if (embeddings.size() < 2)
    throw DomainError("collision_scan: need at least 2 identities");
  ScanReport rep;
  rep.threshold = threshold;
  std::vector<float> distances;
  distances.reserve(embeddings.size() * (embeddings.size() - 1) / 2);
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < embeddings.size(); ++j)
      distances.push_back(siamese::distance(embeddings[i], embeddings[j]));

  rep.pair_count = distances.size();
  rep.min_distance = *std::min_element(distances.begin(), distances.end());
  rep.max_distance = *std::max_element(distances.begin(), distances.end());
  rep.histogram.assign(
      static_cast<std::size_t>(rep.max_distance / rep.bin_width) + 1, 0);
  for (float d : distances) {
    if (d < threshold) ++rep.below_threshold;
    if (d < threshold / 2) ++rep.below_half_threshold;
    std::size_t bin = static_cast<std::size_t>(d / rep.bin_width);
    if (bin >= rep.histogram.size()) bin = rep.histogram.size() - 1;
    ++rep.histogram[bin];
  }
  return rep;
}

ScanReport collision_scan(const avatar::Corpus& corpus,
                          const siamese::Embedder& embedder, float threshold) {
  if (corpus.size() < 2)
    throw DomainError("collision_scan: need at least 2 identities");
  std::vector<std::vector<float>> embeddings;
  embeddings.reserve(corpus.size());
  for (int i = 0; i < corpus.size(); ++i)
    embeddings.push_back(embedder.embed(corpus.variant(i, 400)));
  return collision_scan_embeddings(embeddings, threshold);
}

VectorStats vector_stats(std::span<const siamese::FeatureVector> vectors) {
  if (vectors.empty()) throw DomainError("vector_stats: no vectors");
  VectorStats st;
  st.vector_count = vectors.size();
  for (const siamese::FeatureVector& v : vectors)
    st.sorted_values.insert(st.sorted_values.end(), v.values.begin(),
                            v.values.end());
  st.value_count = st.sorted_values.size();
  std::sort(st.sorted_values.begin(), st.sorted_values.end());
  st.min = st.sorted_values.front();
  st.max = st.sorted_values.back();
  double sum = 0;
  for (float v : st.sorted_values) sum += v;
  st.mean = sum / static_cast<double>(st.value_count);
  double ss = 0;
  for (float v : st.sorted_values) ss += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(ss / static_cast<double>(st.value_count));

  st.histogram_origin =
      std::floor(st.min / st.bin_width) * st.bin_width;
  const std::size_t bins =
      static_cast<std::size_t>((st.max - st.histogram_origin) / st.bin_width) + 1;
  st.histogram.assign(bins, 0);
  for (float v : st.sorted_values) {
    std::size_t bin = static_cast<std::size_t>((v - st.histogram_origin) / st.bin_width);
    if (bin >= bins) bin = bins - 1;
    ++st.histogram[bin];
  }
  return st;
}

// --- reports ---------------------------------------------------------------------

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : path_(path), file_(path, std::ios::trunc), columns_(header.size()) {
  if (!file_) throw FormatError("csv: cannot open " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw FormatError("csv: row width mismatch in " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) file_ << ',';
    file_ << cells[i];
  }
  file_ << '\n';
  file_.flush();
}

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace occ::harness

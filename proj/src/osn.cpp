#include "occ/osn/client.hpp"
#include "occ/osn/service.hpp"

#include "occ/avatar/codecs.hpp"
#include "occ/rng.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace occ::osn {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool contains_lower(const std::string& lower_haystack,
                    const std::string& lower_needle) {
  return lower_haystack.find(lower_needle) != std::string::npos;
}

// Background tweet templates. Slots are filled from the pools below; every
// template mentions {topic} so the trend counters see the traffic. A few are
// deliberately short or carry links/emoji so the cleaning stage has work to do.
const char* kTemplates[] = {
    "honestly {topic} has been the most {adj} thing {name} and i have seen all year",
    "just got back from {place} and everyone there was talking about {topic} for hours",
    "can we talk about how {adj} {thing} at {topic} was tonight because wow",
    "{name} said {topic} would be boring but {thing} proved them completely wrong tonight",
    "day {n} of {topic} and i still cannot believe how {adj} it feels out here",
    "my whole feed is {topic} right now and honestly i am not complaining at all",
    "waited {n} minutes near {place} just to catch a glimpse of {topic} totally worth it",
    "if you are not watching {topic} right now you are missing something truly {adj}",
    "the way {thing} lit up during {topic} tonight was honestly {adj} beyond words",
    "grabbed coffee with {name} at {place} and we could not stop discussing {topic}",
    "hot take but {topic} this year is way more {adj} than last year by far",
    "someone explain why {thing} at {topic} made me tear up a little tonight",
    "never thought i would care about {topic} yet here i am glued since {n} pm",
    "told {name} to meet me at {place} before {topic} starts do not be late",
    "the energy around {topic} tonight is {adj} and the whole city can feel it",
    "update from {place} the crowd for {topic} just keeps growing by the minute",
    "okay, {topic} really said: bring {thing} -- and {place} absolutely delivered tonight, right {name}?",
    "full recap of {topic} here https://clips.example/{n} and honestly {thing} stole the show",
    "counting down to {topic} with {name} \xF0\x9F\x8E\x89 this is going to be so {adj} tonight",
    "between {thing} and the people at {place} i would call {topic} a {adj} success so far",
    "{topic} is so {adj} tonight",
    "cannot stop watching {topic} wow",
    "{name} we need to talk about {topic}",
};

const char* kNames[] = {"maya",  "jonas", "priya", "tariq", "elena", "marco",
                        "aisha", "devon", "lucia", "omar",  "nina",  "felix",
                        "zara",  "kofi",  "ida",   "ravi",  "selma", "bruno",
                        "chen",  "amara", "teo",   "lena",  "musa",  "petra"};

const char* kPlaces[] = {"downtown",     "the park",    "the stadium",
                         "the riverside", "the old town", "the market",
                         "campus",        "the harbor",  "the rooftop",
                         "the plaza",     "the arena",   "the station"};

const char* kAdjs[] = {"amazing",  "wild",     "unreal",  "chaotic",
                       "beautiful", "strange",  "electric", "cozy",
                       "loud",      "peaceful", "brilliant", "messy",
                       "golden",    "hazy",     "crisp",    "bold"};

const char* kThings[] = {"the lineup",      "the crowd",      "the lights",
                         "the food stalls", "the opening act", "the queue",
                         "the weather",     "the tickets",    "the merch table",
                         "the sound system", "the fireworks",  "the after party"};

template <std::size_t N>
const char* pick(const char* const (&pool)[N], Rng& rng) {
  return pool[rng.index(N)];
}

std::string instantiate_template(const std::string& tmpl,
                                 const std::string& topic, Rng& rng) {
  std::string out;
  out.reserve(tmpl.size() + 32);
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const std::size_t end = tmpl.find('}', i);
      if (end != std::string::npos) {
        const std::string slot = tmpl.substr(i + 1, end - i - 1);
        if (slot == "topic") out += topic;
        else if (slot == "name") out += pick(kNames, rng);
        else if (slot == "place") out += pick(kPlaces, rng);
        else if (slot == "adj") out += pick(kAdjs, rng);
        else if (slot == "thing") out += pick(kThings, rng);
        else if (slot == "n") out += std::to_string(2 + rng.index(98));
        else out += tmpl.substr(i, end - i + 1);
        i = end + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace

std::string size_suffix(int side) {
  switch (side) {
    case 48: return "normal";
    case 73: return "bigger";
    case 200: return "200x200";
    case 400: return "400x400";
  }
  throw DomainError("size_suffix: unknown avatar size " + std::to_string(side));
}

int suffix_size(const std::string& s) {
  if (s == "normal") return 48;
  if (s == "bigger") return 73;
  if (s == "200x200") return 200;
  if (s == "400x400") return 400;
  throw DomainError("suffix_size: unknown avatar suffix " + s);
}

// --- config -----------------------------------------------------------------

ServiceConfig ServiceConfig::from_json_text(const std::string& text,
                                            const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("service config: ") + e.what());
  }
  ServiceConfig cfg;
  cfg.port = j.value("port", cfg.port);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.admin_token = j.value("admin_token", cfg.admin_token);
  cfg.avatar_quality = j.value("avatar_quality", cfg.avatar_quality);
  cfg.background_accounts = j.value("background_accounts", cfg.background_accounts);
  cfg.corpus_seed = j.value("corpus_seed", cfg.corpus_seed);
  cfg.retweet_fraction = j.value("retweet_fraction", cfg.retweet_fraction);
  if (j.contains("areas")) {
    for (const auto& ja : j.at("areas")) {
      AreaConfig area;
      area.id = ja.at("id").get<std::string>();
      for (const auto& jt : ja.at("topics")) {
        TopicConfig t;
        t.name = jt.at("name").get<std::string>();
        t.rate = jt.at("rate").get<double>();
        area.topics.push_back(std::move(t));
      }
      cfg.areas.push_back(std::move(area));
    }
  }
  if (j.contains("templates"))
    for (const auto& t : j.at("templates"))
      cfg.templates.push_back(t.get<std::string>());
  if (j.contains("templates_file")) {
    std::string path = j.at("templates_file").get<std::string>();
    if (!base_dir.empty() && !path.empty() && path[0] != '/')
      path = base_dir + "/" + path;
    std::ifstream f(path);
    if (!f) throw FormatError("service config: cannot open templates file " + path);
    std::string line;
    while (std::getline(f, line))
      if (!line.empty() && line[0] != '#') cfg.templates.push_back(line);
  }
  return cfg;
}

ServiceConfig ServiceConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("service config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::size_t slash = path.find_last_of('/');
  return from_json_text(ss.str(),
                        slash == std::string::npos ? "" : path.substr(0, slash));
}

// --- service ----------------------------------------------------------------

Service::Service(ServiceConfig cfg, const avatar::Corpus* background_corpus)
    : cfg_(std::move(cfg)) {
  if (cfg_.templates.empty())
    for (const char* t : kTemplates) cfg_.templates.push_back(t);
  if (cfg_.corpus_seed == 0) cfg_.corpus_seed = derive_seed(cfg_.seed, 0xc0b5);

  for (const AreaConfig& a : cfg_.areas) {
    AreaState st;
    st.id = a.id;
    for (const TopicConfig& t : a.topics) {
      TopicState ts;
      ts.cfg = t;
      ts.lower_name = lower(t.name);
      st.topics.push_back(std::move(ts));
    }
    areas_.push_back(std::move(st));
  }

  avatar::Corpus generated;
  const avatar::Corpus* corpus = background_corpus;
  if (!corpus && cfg_.background_accounts > 0) {
    avatar::CorpusSpec spec;
    spec.identities = cfg_.background_accounts;
    spec.seed = cfg_.corpus_seed;
    spec.quality = cfg_.avatar_quality;
    generated = avatar::Corpus::generate(spec);
    corpus = &generated;
  }
  for (int i = 0; i < cfg_.background_accounts; ++i) {
    const AccountCredentials cred =
        create_account_locked("user" + std::to_string(i));
    background_ids_.push_back(cred.account_id);
    if (corpus && corpus->size() > 0) {
      Account& acc = accounts_.at(cred.account_id);
      const int src = i % corpus->size();
      for (int s : avatar::kSizeVariants)
        acc.avatar[s] = corpus->variant_bytes(src, s);
      acc.avatar_version = 1;
    }
  }

  recompute_trends(0);
}

const Service::Account& Service::require_token(const std::string& token) const {
  auto it = token_to_account_.find(token);
  if (it == token_to_account_.end())
    throw AuthError("unknown or invalid token");
  return accounts_.at(it->second);
}

AccountCredentials Service::create_account_locked(const std::string& handle) {
  if (handle.empty()) throw RequestError("create_account: empty handle");
  Account acc;
  acc.id = "acct-" + std::to_string(next_account_);
  acc.handle = handle;
  acc.token = "tok-" + std::to_string(derive_seed(cfg_.seed, next_account_, 0x70c3));
  ++next_account_;
  token_to_account_[acc.token] = acc.id;
  const AccountCredentials cred{acc.id, acc.token};
  accounts_.emplace(acc.id, std::move(acc));
  return cred;
}

AccountCredentials Service::create_account(const std::string& handle) {
  std::unique_lock lock(mu_);
  return create_account_locked(handle);
}

void Service::install_variants(Account& acc, const avatar::Image& master) {
  for (int s : avatar::kSizeVariants)
    acc.avatar[s] =
        avatar::jpeg_encode(avatar::resize(master, s), cfg_.avatar_quality);
  ++acc.avatar_version;
}

void Service::set_avatar(const std::string& account_id,
                         const std::string& token,
                         const avatar::Image& master) {
  std::unique_lock lock(mu_);
  const Account& owner = require_token(token);
  if (owner.id != account_id && token != cfg_.admin_token)
    throw ForbiddenError("set_avatar: token does not own account");
  auto it = accounts_.find(account_id);
  if (it == accounts_.end())
    throw NotFoundError("set_avatar: unknown account " + account_id);
  install_variants(it->second, master);
}

void Service::set_avatar_png(const std::string& account_id,
                             const std::string& token,
                             std::span<const std::uint8_t> png_bytes) {
  set_avatar(account_id, token, avatar::png_decode(png_bytes));
}

Tweet& Service::append_tweet(const Account& author, std::string text,
                             SimMinutes at, bool is_retweet,
                             std::optional<TweetId> retweet_of) {
  TweetRec rec;
  rec.tweet.id = tweets_.size() + 1;
  rec.tweet.author_id = author.id;
  rec.tweet.author_handle = author.handle;
  rec.tweet.text = std::move(text);
  rec.tweet.created_at = at;
  rec.tweet.is_retweet = is_retweet;
  rec.tweet.retweet_of = retweet_of;
  rec.tweet.avatar_url = "/avatars/" + author.id + "_" + size_suffix(48) + ".jpg";
  rec.lower_text = lower(rec.tweet.text);
  bump_topic_counters(rec.lower_text, at, is_retweet, rec.tweet.id);
  tweets_.push_back(std::move(rec));
  return tweets_.back().tweet;
}

void Service::bump_topic_counters(const std::string& lower_text, SimMinutes at,
                                  bool, TweetId) {
  const std::int64_t bucket = at / kTrendRefreshMinutes;
  for (AreaState& area : areas_)
    for (TopicState& topic : area.topics)
      if (contains_lower(lower_text, topic.lower_name))
        ++topic.buckets[bucket];
}

Tweet Service::post_tweet(const std::string& token, const std::string& text) {
  std::unique_lock lock(mu_);
  const Account& author = require_token(token);
  if (text.empty()) throw RequestError("post_tweet: empty text");
  return append_tweet(author, text, now_, false, std::nullopt);
}

void Service::delete_tweet(const std::string& token, TweetId id) {
  std::unique_lock lock(mu_);
  const Account& owner = require_token(token);
  if (id == 0 || id > tweets_.size())
    throw NotFoundError("delete_tweet: unknown tweet id");
  TweetRec& rec = tweets_[id - 1];
  if (rec.deleted) throw NotFoundError("delete_tweet: unknown tweet id");
  if (rec.tweet.author_id != owner.id)
    throw ForbiddenError("delete_tweet: tweet belongs to another account");
  rec.deleted = true;
}

Tweet Service::get_tweet(TweetId id) const {
  std::shared_lock lock(mu_);
  if (id == 0 || id > tweets_.size() || tweets_[id - 1].deleted)
    throw NotFoundError("get_tweet: unknown tweet id");
  return tweets_[id - 1].tweet;
}

SearchPage Service::search(const SearchQuery& q) const {
  std::shared_lock lock(mu_);
  const int count = std::clamp(q.count, 1, kMaxSearchCount);
  std::size_t start = tweets_.size();  // exclusive upper bound on index+1
  if (!q.cursor.empty()) {
    if (q.cursor.size() > 19) throw RequestError("search: malformed cursor");
    TweetId cur = 0;
    for (char c : q.cursor) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw RequestError("search: malformed cursor");
      cur = cur * 10 + (c - '0');
    }
    start = std::min<std::size_t>(cur > 0 ? cur - 1 : 0, tweets_.size());
  }

  const std::string needle = lower(q.query);
  SearchPage page;
  for (std::size_t i = start; i-- > 0;) {
    const TweetRec& rec = tweets_[i];
    if (rec.deleted) continue;
    if (!q.lang.empty() && rec.tweet.lang != q.lang) continue;
    if (!needle.empty() && !contains_lower(rec.lower_text, needle)) continue;
    if (static_cast<int>(page.tweets.size()) < count) {
      page.tweets.push_back(rec.tweet);
    } else {
      // one more match exists beyond this page
      page.next_cursor = std::to_string(page.tweets.back().id);
      break;
    }
  }
  return page;
}

std::vector<Trend> Service::trends(const std::string& area,
                                   std::optional<SimMinutes> epoch) const {
  std::shared_lock lock(mu_);
  for (const AreaState& st : areas_) {
    if (st.id != area) continue;
    SimMinutes boundary = epoch.value_or(now_);
    if (boundary < 0) throw NotFoundError("trends: negative epoch");
    boundary -= boundary % kTrendRefreshMinutes;
    auto it = st.snapshots.find(boundary);
    if (it == st.snapshots.end())
      throw NotFoundError("trends: no snapshot for epoch " +
                          std::to_string(boundary));
    return it->second;
  }
  throw NotFoundError("trends: unknown area " + area);
}

std::vector<std::uint8_t> Service::avatar_bytes(const std::string& account_id,
                                                int size) const {
  std::shared_lock lock(mu_);
  auto it = accounts_.find(account_id);
  if (it == accounts_.end())
    throw NotFoundError("avatar: unknown account " + account_id);
  auto v = it->second.avatar.find(size);
  if (v == it->second.avatar.end())
    throw NotFoundError("avatar: no size " + std::to_string(size) +
                        " for account " + account_id);
  return v->second;
}

std::vector<std::uint8_t> Service::avatar_by_path(
    const std::string& filename) const {
  // "{account}_{suffix}.jpg"
  if (filename.size() < 5 || filename.substr(filename.size() - 4) != ".jpg")
    throw NotFoundError("avatar: bad path " + filename);
  const std::string stem = filename.substr(0, filename.size() - 4);
  const std::size_t underscore = stem.find_last_of('_');
  if (underscore == std::string::npos)
    throw NotFoundError("avatar: bad path " + filename);
  int size = 0;
  try {
    size = suffix_size(stem.substr(underscore + 1));
  } catch (const DomainError&) {
    throw NotFoundError("avatar: bad size suffix in " + filename);
  }
  return avatar_bytes(stem.substr(0, underscore), size);
}

SimMinutes Service::now() const {
  std::shared_lock lock(mu_);
  return now_;
}

void Service::inject_minute(SimMinutes minute) {
  for (std::size_t ai = 0; ai < areas_.size(); ++ai) {
    AreaState& area = areas_[ai];
    for (TopicState& topic : area.topics) {
      Rng rng(derive_seed(cfg_.seed, fnv1a64(area.id), fnv1a64(topic.cfg.name),
                          static_cast<std::uint64_t>(minute)));
      const int arrivals = rng.poisson(topic.cfg.rate);
      for (int k = 0; k < arrivals; ++k) {
        const Account& author =
            accounts_.at(background_ids_[rng.index(background_ids_.size())]);
        const bool retweet = topic.last_original.has_value() &&
                             rng.chance(cfg_.retweet_fraction);
        if (retweet) {
          const TweetRec& orig = tweets_[*topic.last_original - 1];
          append_tweet(author, orig.tweet.text, minute, true, orig.tweet.id);
        } else {
          const std::string text = instantiate_template(
              cfg_.templates[rng.index(cfg_.templates.size())],
              topic.cfg.name, rng);
          const Tweet& t = append_tweet(author, text, minute, false, std::nullopt);
          topic.last_original = t.id;
        }
      }
    }
  }
}

void Service::recompute_trends(SimMinutes boundary) {
  const std::int64_t bucket_hi = boundary / kTrendRefreshMinutes;
  const std::int64_t bucket_lo = bucket_hi - 287;  // trailing 24 sim-hours
  for (AreaState& area : areas_) {
    std::vector<Trend> list;
    for (TopicState& topic : area.topics) {
      // prune buckets that fell out of every future window
      while (!topic.buckets.empty() &&
             topic.buckets.begin()->first < bucket_lo)
        topic.buckets.erase(topic.buckets.begin());
      std::int64_t volume = 0;
      for (const auto& [b, c] : topic.buckets)
        if (b >= bucket_lo && b <= bucket_hi) volume += c;
      if (volume <= 0) continue;
      Trend t;
      t.topic = topic.cfg.name;
      t.area = area.id;
      t.volume = volume;
      if (volume > kVolumeGate) t.reported_volume = volume;
      list.push_back(std::move(t));
    }
    std::sort(list.begin(), list.end(), [](const Trend& a, const Trend& b) {
      if (a.volume != b.volume) return a.volume > b.volume;
      return a.topic < b.topic;
    });
    if (list.size() > kMaxTrends) list.resize(kMaxTrends);
    area.snapshots[boundary] = std::move(list);
  }
}

SimMinutes Service::advance_clock(int minutes) {
  if (minutes < 0) throw DomainError("advance_clock: negative minutes");
  std::unique_lock lock(mu_);
  for (int i = 0; i < minutes; ++i) {
    const SimMinutes m = now_ + 1;
    inject_minute(m);
    if (m % kTrendRefreshMinutes == 0) recompute_trends(m);
    now_ = m;
  }
  return now_;
}

bool Service::is_admin(const std::string& token) const {
  return token == cfg_.admin_token;
}

std::uint64_t Service::state_fingerprint() const {
  std::shared_lock lock(mu_);
  std::uint64_t h = 0x9d2c5680u;
  auto fold = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  fold(static_cast<std::uint64_t>(now_));
  fold(tweets_.size());
  for (const TweetRec& rec : tweets_) {
    fold(rec.tweet.id);
    fold(fnv1a64(rec.tweet.author_id));
    fold(fnv1a64(rec.tweet.text));
    fold(static_cast<std::uint64_t>(rec.tweet.created_at));
    fold(rec.tweet.is_retweet ? 1 : 0);
    fold(rec.deleted ? 1 : 0);
  }
  for (const AreaState& area : areas_) {
    fold(fnv1a64(area.id));
    for (const auto& [boundary, list] : area.snapshots) {
      fold(static_cast<std::uint64_t>(boundary));
      for (const Trend& t : list) {
        fold(fnv1a64(t.topic));
        fold(static_cast<std::uint64_t>(t.volume));
        fold(t.reported_volume ? static_cast<std::uint64_t>(*t.reported_volume)
                               : 0xffffffffffffffffull);
      }
    }
  }
  fold(accounts_.size());
  return h;
}

// --- local client ------------------------------------------------------------

std::string substitute_size_suffix(const std::string& url, int size) {
  const std::size_t dot = url.rfind(".jpg");
  const std::size_t underscore = url.find_last_of('_');
  if (dot == std::string::npos || underscore == std::string::npos ||
      underscore >= dot)
    throw DomainError("substitute_size_suffix: not an avatar link: " + url);
  return url.substr(0, underscore + 1) + size_suffix(size) + ".jpg";
}

std::vector<std::uint8_t> LocalClient::avatar_by_url(const std::string& url,
                                                     int size) {
  const std::string resolved = substitute_size_suffix(url, size);
  const std::size_t slash = resolved.find_last_of('/');
  return service_.avatar_by_path(
      slash == std::string::npos ? resolved : resolved.substr(slash + 1));
}

SimMinutes LocalClient::advance_clock(const std::string& admin_token,
                                      int minutes) {
  if (!service_.is_admin(admin_token))
    throw AuthError("advance_clock: admin token required");
  return service_.advance_clock(minutes);
}

}  // namespace occ::osn

#include "occ/tweetgen/tweetgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace occ::tweetgen {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Lookup key for a token: lowercased, trailing sentence punctuation removed.
std::string lookup_key(const std::string& token) {
  std::string t = token;
  while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?'))
    t.pop_back();
  return lower(t);
}

bool is_url_token(const std::string& token) {
  const std::string t = lower(token);
  return t.rfind("http://", 0) == 0 || t.rfind("https://", 0) == 0 ||
         t.rfind("www.", 0) == 0;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string strip_text(const std::string& text) {
  // URL removal is token-wise; everything else is character-wise.
  std::vector<std::string> kept;
  for (const std::string& tok : tokenize(text)) {
    if (is_url_token(tok)) continue;
    std::string w;
    for (char c : tok) {
      const unsigned char uc = static_cast<unsigned char>(c);
      if (uc > 0x7f) continue;  // emoji and any other non-ASCII
      if (std::isalnum(uc) || c == '.' || c == '!' || c == '?') {
        w.push_back(c);
      } else if (c == '\'' || c == '-' || c == ',' || c == ';' || c == ':' ||
                 c == '"' || c == '#' || c == '@' || c == '(' || c == ')' ||
                 c == '&' || c == '*' || c == '/' || c == '\\' || c == '%' ||
                 c == '$' || c == '+' || c == '=' || c == '_' || c == '~' ||
                 c == '<' || c == '>' || c == '[' || c == ']' || c == '{' ||
                 c == '}' || c == '^' || c == '`' || c == '|') {
        // dropped punctuation
      }
      // tabs/line breaks never reach here: tokenize splits on them
    }
    if (!w.empty()) kept.push_back(w);
  }
  return join(kept);
}

std::vector<CleanTweet> clean(const std::vector<RawPost>& raw) {
  std::vector<CleanTweet> out;
  std::unordered_set<std::string> seen;
  for (const RawPost& post : raw) {
    if (tokenize(post.text).size() < 10) continue;
    if (post.is_retweet) continue;
    const std::string text = strip_text(post.text);
    if (tokenize(text).size() < 10) continue;
    if (!seen.insert(text).second) continue;
    out.push_back(CleanTweet{post.id, text});
  }
  return out;
}

// --- lexicon ----------------------------------------------------------------

const std::unordered_set<std::string>& SynonymLexicon::default_stopwords() {
  static const std::unordered_set<std::string> kStop = {
      "i",      "me",    "my",    "myself", "we",     "our",   "ours",
      "you",    "your",  "yours", "he",     "him",    "his",   "she",
      "her",    "hers",  "it",    "its",    "they",   "them",  "their",
      "what",   "which", "who",   "whom",   "this",   "that",  "these",
      "those",  "am",    "is",    "are",    "was",    "were",  "be",
      "been",   "being", "have",  "has",    "had",    "do",    "does",
      "did",    "a",     "an",    "the",    "and",    "but",   "if",
      "or",     "as",    "of",    "at",     "by",     "for",   "with",
      "about",  "into",  "to",    "from",   "in",     "on",    "off",
      "out",    "over",  "under", "again",  "then",   "once",  "here",
      "there",  "when",  "where", "why",    "how",    "all",   "any",
      "both",   "each",  "few",   "more",   "most",   "some",  "such",
      "no",     "nor",   "not",   "only",   "own",    "same",  "so",
      "than",   "too",   "very",  "can",    "will",   "just",  "up",
      "down",   "what's"};
  return kStop;
}

SynonymLexicon SynonymLexicon::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("lexicon: cannot open " + path);
  SynonymLexicon lex;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("lexicon: missing tab separator in line: " + line);
    const std::string word = lower(line.substr(0, tab));
    std::vector<std::string> syns;
    std::string item;
    std::istringstream rest(line.substr(tab + 1));
    while (std::getline(rest, item, ',')) {
      if (!item.empty()) syns.push_back(lower(item));
    }
    lex.add(word, syns);
  }
  return lex;
}

void SynonymLexicon::add(const std::string& word,
                         const std::vector<std::string>& syns) {
  const std::string key = lower(word);
  std::vector<std::string>& dst = map_[key];
  for (const std::string& s : syns) {
    const std::string ls = lower(s);
    if (ls == key) continue;  // a word is never its own synonym
    if (std::find(dst.begin(), dst.end(), ls) == dst.end()) dst.push_back(ls);
  }
  if (dst.empty()) map_.erase(key);
}

void SynonymLexicon::add_stopword(const std::string& word) {
  stop_.insert(lower(word));
}

bool SynonymLexicon::is_stopword(const std::string& token) const {
  const std::string key = lookup_key(token);
  return stop_.count(key) > 0 || default_stopwords().count(key) > 0;
}

const std::vector<std::string>& SynonymLexicon::synonyms(
    const std::string& token) const {
  auto it = map_.find(lookup_key(token));
  return it == map_.end() ? empty_ : it->second;
}

// --- EDA operations ---------------------------------------------------------

std::string synonym_replacement(const std::string& s, int n,
                                const SynonymLexicon& lex, Rng& rng) {
  if (n < 0) throw DomainError("synonym_replacement: negative n");
  if (n == 0) return s;
  std::vector<std::string> words = tokenize(s);

  // Distinct non-stopword candidates, shuffled; replace every occurrence of a
  // chosen word until n are replaced.
  std::vector<std::string> candidates;
  std::unordered_set<std::string> seen;
  for (const std::string& w : words) {
    const std::string key = lookup_key(w);
    if (key.empty() || lex.is_stopword(w)) continue;
    if (seen.insert(key).second) candidates.push_back(key);
  }
  rng.shuffle(candidates);

  int replaced = 0;
  for (const std::string& target : candidates) {
    const std::vector<std::string>& syns = lex.synonyms(target);
    if (syns.empty()) continue;
    const std::string& choice = syns[rng.index(syns.size())];
    for (std::string& w : words) {
      if (lookup_key(w) != target) continue;
      // keep any trailing punctuation with the word
      std::string tail;
      std::string base = w;
      while (!base.empty() &&
             (base.back() == '.' || base.back() == '!' || base.back() == '?')) {
        tail.insert(tail.begin(), base.back());
        base.pop_back();
      }
      w = choice + tail;
    }
    if (++replaced >= n) break;
  }
  return join(words);
}

std::string random_insertion(const std::string& s, int n,
                             const SynonymLexicon& lex, Rng& rng) {
  if (n < 0) throw DomainError("random_insertion: negative n");
  if (n == 0) return s;
  std::vector<std::string> words = tokenize(s);
  if (words.empty()) return s;

  for (int i = 0; i < n; ++i) {
    // pick a word that has synonyms, up to a bounded number of tries
    for (int attempt = 0; attempt < 10; ++attempt) {
      const std::string& w = words[rng.index(words.size())];
      const std::vector<std::string>& syns = lex.synonyms(w);
      if (syns.empty() || lex.is_stopword(w)) continue;
      const std::string& ins = syns[rng.index(syns.size())];
      words.insert(words.begin() + rng.index(words.size() + 1), ins);
      break;
    }
  }
  return join(words);
}

std::string random_swap(const std::string& s, int n, Rng& rng) {
  if (n < 0) throw DomainError("random_swap: negative n");
  if (n == 0) return s;
  std::vector<std::string> words = tokenize(s);
  if (words.size() < 2) return s;
  for (int i = 0; i < n; ++i) {
    const std::size_t a = rng.index(words.size());
    std::size_t b = a;
    for (int attempt = 0; attempt < 3 && b == a; ++attempt)
      b = rng.index(words.size());
    std::swap(words[a], words[b]);
  }
  return join(words);
}

std::string random_deletion(const std::string& s, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw DomainError("random_deletion: p outside [0,1]");
  if (p == 0.0) return s;
  std::vector<std::string> words = tokenize(s);
  if (words.size() <= 1) return s;
  std::vector<std::string> kept;
  for (const std::string& w : words)
    if (!rng.chance(p)) kept.push_back(w);
  if (kept.empty()) kept.push_back(words[rng.index(words.size())]);
  return join(kept);
}

// --- augmentation -----------------------------------------------------------

std::vector<std::string> augment(const CleanTweet& tweet,
                                 const AugmentConfig& cfg,
                                 const SynonymLexicon& lex) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t word_count = tokenize(tweet.text).size();
  const int n = std::max(
      1, static_cast<int>(std::lround(cfg.alpha * static_cast<double>(word_count))));

  std::vector<std::string> out;
  out.reserve(cfg.num_aug);
  for (int i = 0; i < cfg.num_aug; ++i) {
    switch (rng.index(4)) {
      case 0: out.push_back(synonym_replacement(tweet.text, n, lex, rng)); break;
      case 1: out.push_back(random_insertion(tweet.text, n, lex, rng)); break;
      case 2: out.push_back(random_swap(tweet.text, n, rng)); break;
      default: out.push_back(random_deletion(tweet.text, cfg.alpha, rng)); break;
    }
  }
  return out;
}

std::vector<std::string> augment_corpus(const std::vector<CleanTweet>& tweets,
                                        const AugmentConfig& cfg,
                                        const SynonymLexicon& lex) {
  cfg.validate();
  std::vector<std::string> out;
  out.reserve(tweets.size() * static_cast<std::size_t>(cfg.num_aug));
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    AugmentConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, i);
    const std::vector<std::string> got = augment(tweets[i], sub, lex);
    out.insert(out.end(), got.begin(), got.end());
  }
  return out;
}

namespace {

const char* kSuffixes[6] = {".", "..", "...", "!", "!!", "!!!"};
const char* kNoiseSuffixes[3] = {"?", "??", "???"};

std::string upper(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace

std::vector<std::string> expand_variants(const std::vector<std::string>& sentences) {
  std::vector<std::string> out;
  out.reserve(sentences.size() * 7);
  for (const std::string& s : sentences) {
    out.push_back(s);
    const std::string u = upper(s);
    for (const char* suffix : kSuffixes) out.push_back(u + suffix);
  }
  return out;
}

std::vector<std::string> expand_variants_noisy(
    const std::vector<std::string>& sentences) {
  std::vector<std::string> out;
  out.reserve(sentences.size() * 10);
  for (const std::string& s : sentences) {
    out.push_back(s);
    const std::string u = upper(s);
    for (const char* suffix : kSuffixes) out.push_back(u + suffix);
    for (const char* suffix : kNoiseSuffixes) out.push_back(u + suffix);
  }
  return out;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return true;
  const std::string h = lower(haystack), n = lower(needle);
  return h.find(n) != std::string::npos;
}

double keyword_retention(const std::vector<std::string>& sentences,
                         const std::string& topic) {
  if (topic.empty()) throw DomainError("keyword_retention: empty topic");
  if (sentences.empty()) return 0.0;
  std::size_t hits = 0;
  for (const std::string& s : sentences)
    if (contains_ci(s, topic)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(sentences.size());
}

}  // namespace occ::tweetgen

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "occ/errors.hpp"
#include "occ/rng.hpp"

namespace occ::tweetgen {

// Tokenization rule used everywhere in this module: split on whitespace,
// punctuation binds to the preceding token.
std::vector<std::string> tokenize(const std::string& s);
std::string join(const std::vector<std::string>& words);

struct RawPost {
  std::uint64_t id = 0;
  std::string text;
  bool is_retweet = false;
};

struct CleanTweet {
  std::uint64_t original_id = 0;
  std::string text;  // >= 10 words, ASCII, punctuation limited to . ! ?
};

// Cleaning pipeline: drop posts under 10 words, drop retweets, strip URLs /
// non-ASCII / tabs / line breaks / punctuation other than . ! ?, re-check the
// 10-word floor, then exact-dedupe. Idempotent.
std::vector<CleanTweet> clean(const std::vector<RawPost>& raw);
std::string strip_text(const std::string& text);

class SynonymLexicon {
 public:
  SynonymLexicon() = default;

  // File format: `word<TAB>syn1,syn2,...` per line, UTF-8, '#' comments.
  static SynonymLexicon load(const std::string& path);

  void add(const std::string& word, const std::vector<std::string>& syns);
  void add_stopword(const std::string& word);
  static const std::unordered_set<std::string>& default_stopwords();

  bool is_stopword(const std::string& token) const;
  // Synonyms for a token (case-insensitive, trailing .!? ignored); empty when
  // none are known.
  const std::vector<std::string>& synonyms(const std::string& token) const;

  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> map_;
  std::unordered_set<std::string> stop_;
  std::vector<std::string> empty_;
};

// The four augmentation operations. Zero intensity is the exact identity.
std::string synonym_replacement(const std::string& s, int n,
                                const SynonymLexicon& lex, Rng& rng);
std::string random_insertion(const std::string& s, int n,
                             const SynonymLexicon& lex, Rng& rng);
std::string random_swap(const std::string& s, int n, Rng& rng);
std::string random_deletion(const std::string& s, double p, Rng& rng);

struct AugmentConfig {
  double alpha = 0.1;  // fraction of words touched per operation
  int num_aug = 50;    // sentences generated per input
  std::uint64_t seed = 0;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0)
      throw DomainError("AugmentConfig: alpha outside [0,1]");
    if (num_aug < 1) throw DomainError("AugmentConfig: num_aug must be >= 1");
  }
};

// num_aug sentences from one tweet; the operation for each output sentence is
// drawn uniformly from {SR, RI, RS, RD}.
std::vector<std::string> augment(const CleanTweet& tweet,
                                 const AugmentConfig& cfg,
                                 const SynonymLexicon& lex);

// Whole-corpus augmentation with per-tweet derived sub-seeds, so any parallel
// split over tweets agrees with the serial run.
std::vector<std::string> augment_corpus(const std::vector<CleanTweet>& tweets,
                                        const AugmentConfig& cfg,
                                        const SynonymLexicon& lex);

// 7 candidates per sentence: the original, then the uppercased sentence with
// each of ".", "..", "...", "!", "!!", "!!!" appended.
std::vector<std::string> expand_variants(const std::vector<std::string>& sentences);

// Same expansion plus the "?", "??", "???" retry suffixes (10 per sentence).
std::vector<std::string> expand_variants_noisy(const std::vector<std::string>& sentences);

// Fraction of sentences containing the topic, case-insensitively.
double keyword_retention(const std::vector<std::string>& sentences,
                         const std::string& topic);

bool contains_ci(const std::string& haystack, const std::string& needle);

}  // namespace occ::tweetgen

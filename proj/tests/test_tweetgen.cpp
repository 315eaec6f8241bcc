#include "doctest.h"

#include "occ/tweetgen/tweetgen.hpp"

#include <algorithm>
#include <set>

using namespace occ;
using namespace occ::tweetgen;

#ifndef OCC_DATA_DIR
#define OCC_DATA_DIR "data"
#endif

namespace {

const char* kTableSentence =
    "Our TAXII server is going to be taking a short nap at 11am ET today for "
    "an update.";

SynonymLexicon tiny_lexicon() {
  SynonymLexicon lex;
  lex.add("going", {"endure"});
  return lex;
}

std::vector<RawPost> posts(std::initializer_list<const char*> texts) {
  std::vector<RawPost> out;
  std::uint64_t id = 0;
  for (const char* t : texts) out.push_back(RawPost{++id, t, false});
  return out;
}

}  // namespace

TEST_CASE("clean: word floor, stripping, retweets, dedupe") {
  // 9 words: dropped
  auto cleaned = clean(posts({"one two three four five six seven eight nine"}));
  CHECK(cleaned.empty());

  // URL and emoji stripped, still >= 10 words: kept
  cleaned = clean(posts({"check this https://x.example/a out \xF0\x9F\x98\x80 "
                         "one two three four five six seven eight"}));
  REQUIRE(cleaned.size() == 1);
  CHECK(cleaned[0].text ==
        "check this out one two three four five six seven eight");

  // stripping below the floor drops the tweet
  cleaned = clean(posts({"https://a.example https://b.example one two three "
                         "four five six seven eight"}));
  CHECK(cleaned.empty());

  // punctuation: only . ! ? survive
  cleaned = clean(posts({"wow, this; is: a (very) \"nice\" day today right? "
                         "yes! ok. #tag end"}));
  REQUIRE(cleaned.size() == 1);
  CHECK(cleaned[0].text == "wow this is a very nice day today right? yes! ok. tag end");

  // retweets dropped
  std::vector<RawPost> rt = posts({"alpha beta gamma delta epsilon zeta eta theta iota kappa"});
  rt[0].is_retweet = true;
  CHECK(clean(rt).empty());

  // exact duplicates collapse
  cleaned = clean(posts({"one two three four five six seven eight nine ten",
                         "one two three four five six seven eight nine ten"}));
  CHECK(cleaned.size() == 1);
}

TEST_CASE("clean: idempotent") {
  const auto first = clean(posts(
      {"Tab\there and a line\nbreak with fifteen total words in this one right now ok",
       "plain sentence with exactly ten words inside of it yes"}));
  REQUIRE_FALSE(first.empty());
  std::vector<RawPost> again;
  for (const CleanTweet& t : first) again.push_back(RawPost{t.original_id, t.text, false});
  const auto second = clean(again);
  REQUIRE(second.size() == first.size());
  for (std::size_t i = 0; i < first.size(); ++i)
    CHECK(second[i].text == first[i].text);
}

TEST_CASE("EDA: zero intensity is the identity") {
  const SynonymLexicon lex = tiny_lexicon();
  Rng rng(1);
  const std::string s = kTableSentence;
  CHECK(synonym_replacement(s, 0, lex, rng) == s);
  CHECK(random_insertion(s, 0, lex, rng) == s);
  CHECK(random_swap(s, 0, rng) == s);
  CHECK(random_deletion(s, 0.0, rng) == s);
}

TEST_CASE("EDA: synonym replacement reproduces the reference row") {
  const SynonymLexicon lex = tiny_lexicon();
  Rng rng(7);
  const std::string got = synonym_replacement(kTableSentence, 1, lex, rng);
  CHECK(got ==
        "Our TAXII server is endure to be taking a short nap at 11am ET today "
        "for an update.");
}

TEST_CASE("EDA: replacement skips words without synonyms") {
  SynonymLexicon lex;
  lex.add("absent", {"missing"});
  Rng rng(3);
  const std::string s = "purple elephants dance quietly beneath seventeen vivid skies";
  CHECK(synonym_replacement(s, 2, lex, rng) == s);
}

TEST_CASE("EDA: random swap can produce the reference row") {
  // find a seed that swaps "short" and "TAXII", then pin determinism on it
  const std::string want =
      "Our short server is going to be taking a TAXII nap at 11am ET today "
      "for an update.";
  bool found = false;
  for (std::uint64_t seed = 0; seed < 20000 && !found; ++seed) {
    Rng rng(seed);
    if (random_swap(kTableSentence, 1, rng) == want) {
      Rng again(seed);
      CHECK(random_swap(kTableSentence, 1, again) == want);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("EDA: random swap keeps the multiset of words") {
  Rng rng(11);
  const std::string got = random_swap(kTableSentence, 3, rng);
  auto sorted_words = [](const std::string& s) {
    std::vector<std::string> w = tokenize(s);
    std::sort(w.begin(), w.end());
    return w;
  };
  CHECK(sorted_words(got) == sorted_words(kTableSentence));
}

TEST_CASE("EDA: random deletion boundaries") {
  Rng rng(5);
  // p=1 on a 5-word sentence leaves exactly one word
  const std::string got = random_deletion("alpha beta gamma delta epsilon", 1.0, rng);
  CHECK(tokenize(got).size() == 1);

  // never empties a single-word sentence
  CHECK(random_deletion("solo", 1.0, rng) == "solo");
  CHECK_THROWS_AS(random_deletion("a b", -0.1, rng), DomainError);
}

TEST_CASE("EDA: random insertion adds synonyms at word boundaries") {
  SynonymLexicon lex;
  lex.add("nap", {"doze"});
  Rng rng(2);
  // every word carries a synonym, so each insertion lands
  const std::string got = random_insertion("nap nap nap nap", 2, lex, rng);
  const auto words = tokenize(got);
  REQUIRE(words.size() == 6);
  CHECK(std::count(words.begin(), words.end(), "doze") == 2);
  CHECK(std::count(words.begin(), words.end(), "nap") == 4);

  // insertions on the reference sentence only ever add words
  Rng rng2(3);
  const std::string ref = random_insertion(kTableSentence, 2, lex, rng2);
  CHECK(tokenize(ref).size() >= tokenize(kTableSentence).size());
}

TEST_CASE("augment: count, determinism, and sub-seeded corpus") {
  const SynonymLexicon lex =
      SynonymLexicon::load(std::string(OCC_DATA_DIR) + "/lexicon.tsv");
  CleanTweet tweet{1, "the parade crowd tonight is loud and the lights look golden over downtown"};

  AugmentConfig cfg;
  cfg.alpha = 0.1;
  cfg.num_aug = 50;
  cfg.seed = 9;
  const auto a = augment(tweet, cfg, lex);
  const auto b = augment(tweet, cfg, lex);
  CHECK(a.size() == 50);
  CHECK(a == b);

  cfg.num_aug = 1;
  const auto single = augment(tweet, cfg, lex);
  CHECK(single.size() == 1);

  std::vector<CleanTweet> tweets = {tweet, {2, "everyone at the harbor says the parade this year feels bigger than ever"}};
  cfg.num_aug = 10;
  const auto corpus1 = augment_corpus(tweets, cfg, lex);
  const auto corpus2 = augment_corpus(tweets, cfg, lex);
  CHECK(corpus1.size() == 20);
  CHECK(corpus1 == corpus2);

  // corpus augmentation derives a sub-seed per tweet
  AugmentConfig sub = cfg;
  sub.seed = derive_seed(cfg.seed, 1);
  CHECK(augment(tweets[1], sub, lex) ==
        std::vector<std::string>(corpus1.begin() + 10, corpus1.end()));
}

TEST_CASE("expand_variants: exactly 7 per sentence, deterministic order") {
  const auto got = expand_variants({"ab cd"});
  const std::vector<std::string> want = {"ab cd",     "AB CD.", "AB CD..",
                                         "AB CD...",  "AB CD!", "AB CD!!",
                                         "AB CD!!!"};
  CHECK(got == want);
  CHECK(expand_variants({}).empty());

  std::vector<std::string> many(200, "x y");
  CHECK(expand_variants(many).size() == 1400);
  CHECK(expand_variants_noisy({"ab"}).size() == 10);
}

TEST_CASE("keyword retention: trivial and seeded bounds") {
  CHECK(keyword_retention({"skyfest now", "SKYFEST later"}, "skyfest") == 1.0);
  CHECK(keyword_retention({"nothing here", "nope"}, "skyfest") == 0.0);
  CHECK_THROWS_AS(keyword_retention({"x"}, ""), DomainError);

  const SynonymLexicon lex =
      SynonymLexicon::load(std::string(OCC_DATA_DIR) + "/lexicon.tsv");
  std::vector<CleanTweet> tweets;
  const char* bases[] = {
      "everyone around skyfest tonight keeps saying the lights feel unreal this year",
      "just left downtown because skyfest traffic made the whole evening feel endless",
      "my friends at skyfest say the music and the crowd are both amazing tonight",
      "watching skyfest from the rooftop with coffee and the view is honestly beautiful",
  };
  std::uint64_t id = 0;
  for (const char* b : bases) tweets.push_back(CleanTweet{++id, b});

  AugmentConfig cfg;
  cfg.alpha = 0.1;
  cfg.num_aug = 50;
  cfg.seed = 31;
  const auto sentences = augment_corpus(tweets, cfg, lex);
  REQUIRE(sentences.size() == 200);
  const double retention = keyword_retention(sentences, "skyfest");
  CHECK(retention >= 0.85);
  CHECK(retention <= 1.0);
}

TEST_CASE("lexicon: bundled table loads with sane invariants") {
  const SynonymLexicon lex =
      SynonymLexicon::load(std::string(OCC_DATA_DIR) + "/lexicon.tsv");
  CHECK(lex.size() >= 1500);
  // no word is its own synonym
  for (const char* w : {"going", "short", "update", "crowd", "happy"}) {
    const auto& syns = lex.synonyms(w);
    CHECK_FALSE(syns.empty());
    CHECK(std::find(syns.begin(), syns.end(), w) == syns.end());
  }
  // stopwords are never replacement targets
  CHECK(lex.is_stopword("the"));
  CHECK(lex.is_stopword("The"));
  Rng rng(4);
  CHECK(synonym_replacement("the the the the", 2, lex, rng) == "the the the the");
  // trailing punctuation binds to the token but does not break lookup
  CHECK_FALSE(lex.synonyms("update.").empty());
}

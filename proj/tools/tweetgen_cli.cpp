// tweetgen: cleaning + augmentation pipeline over a file of raw posts
// (one per line; lines starting with "RT " are treated as retweets).
//   tweetgen augment --in raw.txt --alpha 0.1 --num-aug 50 --seed 7

#include "CLI11.hpp"

#include "occ/tweetgen/tweetgen.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#ifndef OCC_DATA_DIR
#define OCC_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  CLI::App app{"tweet cleaning and augmentation tool"};
  app.require_subcommand(1);

  auto* aug = app.add_subcommand("augment", "clean input posts and expand them");
  std::string in_path, out_path, lexicon_path = std::string(OCC_DATA_DIR) + "/lexicon.tsv";
  std::string topic;
  double alpha = 0.1;
  int num_aug = 50;
  std::uint64_t seed = 1;
  bool expand = false;
  aug->add_option("--in", in_path, "raw posts, one per line")->required();
  aug->add_option("--out", out_path, "output file (default: stdout)");
  aug->add_option("--lexicon", lexicon_path, "synonym lexicon TSV");
  aug->add_option("--alpha", alpha, "fraction of words changed per operation")
      ->check(CLI::Range(0.0, 1.0));
  aug->add_option("--num-aug", num_aug, "sentences per cleaned tweet")
      ->check(CLI::PositiveNumber);
  aug->add_option("--seed", seed, "augmentation seed");
  aug->add_flag("--expand", expand, "apply case/punctuation variant expansion (7x)");
  aug->add_option("--topic", topic, "report keyword retention for this topic");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(in_path);
    if (!in) {
      std::fprintf(stderr, "tweetgen: cannot open %s\n", in_path.c_str());
      return 1;
    }
    std::vector<occ::tweetgen::RawPost> raw;
    std::string line;
    std::uint64_t id = 0;
    while (std::getline(in, line)) {
      occ::tweetgen::RawPost post;
      post.id = ++id;
      post.is_retweet = line.rfind("RT ", 0) == 0;
      post.text = post.is_retweet ? line.substr(3) : line;
      raw.push_back(std::move(post));
    }

    const auto cleaned = occ::tweetgen::clean(raw);
    const auto lexicon = occ::tweetgen::SynonymLexicon::load(lexicon_path);
    occ::tweetgen::AugmentConfig cfg;
    cfg.alpha = alpha;
    cfg.num_aug = num_aug;
    cfg.seed = seed;
    std::vector<std::string> sentences =
        occ::tweetgen::augment_corpus(cleaned, cfg, lexicon);
    if (expand) sentences = occ::tweetgen::expand_variants(sentences);

    std::ostream* out = &std::cout;
    std::ofstream out_file;
    if (!out_path.empty()) {
      out_file.open(out_path, std::ios::trunc);
      if (!out_file) {
        std::fprintf(stderr, "tweetgen: cannot open %s\n", out_path.c_str());
        return 1;
      }
      out = &out_file;
    }
    for (const std::string& s : sentences) *out << s << '\n';

    std::fprintf(stderr, "cleaned=%zu sentences=%zu\n", cleaned.size(),
                 sentences.size());
    if (!topic.empty())
      std::fprintf(stderr, "keyword_retention=%.4f\n",
                   occ::tweetgen::keyword_retention(sentences, topic));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tweetgen: %s\n", e.what());
    return 1;
  }
  return 0;
}

// avatar: synthetic avatar corpus generator.
//   avatar gen --n 50 --seed 7 --out corpus/

#include "CLI11.hpp"

#include "occ/avatar/corpus.hpp"

#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
  CLI::App app{"synthetic avatar corpus tool"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a corpus of procedural avatars");
  int n = 10;
  std::uint64_t seed = 1;
  std::string out = "corpus";
  int quality = 85;
  bool allow_flat = false;
  gen->add_option("--n", n, "identity count")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--quality", quality, "JPEG quality for size variants")
      ->check(CLI::Range(1, 100));
  gen->add_flag("--allow-flat", allow_flat,
                "skip the flat-background rejection");

  CLI11_PARSE(app, argc, argv);

  try {
    occ::avatar::CorpusSpec spec;
    spec.identities = n;
    spec.seed = seed;
    spec.quality = quality;
    spec.forbid_flat = !allow_flat;
    const occ::avatar::Corpus corpus = occ::avatar::Corpus::generate(spec);
    corpus.save(out);
    std::printf("wrote %d identities (master.png + 4 size variants) to %s\n",
                corpus.size(), out.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "avatar: %s\n", e.what());
    return 1;
  }
  return 0;
}

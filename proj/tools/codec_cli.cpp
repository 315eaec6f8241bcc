// codec: the command channel's bit layer.
//   codec embed --ip 10.0.0.1 --candidates sentences.txt [--seed 7]
//   codec decode --tweet1 "..." --tweet2 "..."

#include "CLI11.hpp"

#include "occ/codec/codec.hpp"

#include <cstdio>
#include <fstream>

int main(int argc, char** argv) {
  CLI::App app{"IP-over-tweets hash collision codec"};
  app.require_subcommand(1);

  auto* embed = app.add_subcommand(
      "embed", "find two candidate sentences carrying the address");
  std::string ip, candidates_path;
  std::uint64_t seed = 1;
  embed->add_option("--ip", ip, "IPv4 address to embed")->required();
  embed->add_option("--candidates", candidates_path, "candidate sentences, one per line")
      ->required();
  embed->add_option("--seed", seed, "selection seed");

  auto* decode = app.add_subcommand("decode", "recover the address from two tweets");
  std::string tweet1, tweet2;
  decode->add_option("--tweet1", tweet1, "first tweet (posted first)")->required();
  decode->add_option("--tweet2", tweet2, "second tweet")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (embed->parsed()) {
      const occ::codec::Ipv4 addr = occ::codec::Ipv4::parse(ip);
      std::ifstream in(candidates_path);
      if (!in) {
        std::fprintf(stderr, "codec: cannot open %s\n", candidates_path.c_str());
        return 1;
      }
      std::vector<std::string> candidates;
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) candidates.push_back(line);

      occ::Rng rng(seed);
      const occ::codec::CollisionResult res =
          occ::codec::collide(candidates, occ::codec::split_ip(addr), rng);
      std::fprintf(stderr,
                   "scanned=%zu part1_matches=%zu part2_matches=%zu success=%d\n",
                   res.attempts, res.first.matches.size(),
                   res.second.matches.size(), res.success ? 1 : 0);
      if (!res.success) {
        std::fprintf(stderr, "codec: collision failed; add more sentences or noise\n");
        return 2;
      }
      std::printf("%s\n%s\n", res.first.chosen->c_str(), res.second.chosen->c_str());
      return 0;
    }

    const occ::codec::Ipv4 addr = occ::codec::decode({tweet1, tweet2});
    std::printf("%s\n", addr.to_string().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "codec: %s\n", e.what());
    return 1;
  }
  return 0;
}

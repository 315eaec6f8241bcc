// osn-sim: the local social-network service.
//   osn-sim serve --config configs/service.json

#include "CLI11.hpp"

#include "occ/osn/http.hpp"
#include "occ/osn/service.hpp"

#include <cstdio>

int main(int argc, char** argv) {
  CLI::App app{"simulated social network service"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "run the JSON-over-HTTP service");
  std::string config_path;
  std::string host = "127.0.0.1";
  serve->add_option("--config", config_path, "service config JSON")->required();
  serve->add_option("--host", host, "bind address");

  CLI11_PARSE(app, argc, argv);

  try {
    occ::osn::ServiceConfig cfg = occ::osn::ServiceConfig::load(config_path);
    std::printf("starting service: seed=%llu areas=%zu background=%d port=%d\n",
                static_cast<unsigned long long>(cfg.seed), cfg.areas.size(),
                cfg.background_accounts, cfg.port);
    occ::osn::Service service(cfg);
    occ::osn::HttpServer server(service);
    std::printf("listening on %s:%d\n", host.c_str(), cfg.port);
    server.run(host);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "osn-sim: %s\n", e.what());
    return 1;
  }
  return 0;
}

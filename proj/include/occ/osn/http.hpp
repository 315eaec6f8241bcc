#pragma once

#include <memory>
#include <string>

#include "occ/osn/client.hpp"
#include "occ/osn/service.hpp"

namespace occ::osn {

// JSON-over-HTTP wire for the service; one JSON document per message. The
// endpoint schema is documented in docs/wire-protocol.md.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Blocking serve on the configured port.
  void run(const std::string& host = "0.0.0.0");
  // Bind an ephemeral port on host and serve from a background thread.
  // Returns the bound port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpClient : public OsnClient {
 public:
  HttpClient(const std::string& host, int port);
  ~HttpClient() override;

  std::vector<Trend> trends(const std::string& area,
                            std::optional<SimMinutes> epoch) override;
  SearchPage search(const SearchQuery& q) override;
  Tweet post_tweet(const std::string& token, const std::string& text) override;
  void delete_tweet(const std::string& token, TweetId id) override;
  std::vector<std::uint8_t> avatar_by_url(const std::string& url,
                                          int size) override;
  AccountCredentials create_account(const std::string& handle) override;
  void set_avatar_png(const std::string& account_id, const std::string& token,
                      std::span<const std::uint8_t> png) override;
  SimMinutes now() override;
  SimMinutes advance_clock(const std::string& admin_token, int minutes) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string url_encode(const std::string& value);

}  // namespace occ::osn

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "occ/osn/service.hpp"
#include "occ/osn/types.hpp"

namespace occ::osn {

// What an agent can do against the platform. Implemented in-process on top of
// a Service and remotely over the JSON wire protocol; agents are written
// against this interface only.
class OsnClient {
 public:
  virtual ~OsnClient() = default;

  virtual std::vector<Trend> trends(const std::string& area,
                                    std::optional<SimMinutes> epoch = {}) = 0;
  virtual SearchPage search(const SearchQuery& q) = 0;
  virtual Tweet post_tweet(const std::string& token, const std::string& text) = 0;
  virtual void delete_tweet(const std::string& token, TweetId id) = 0;
  virtual std::vector<std::uint8_t> avatar_by_url(const std::string& url,
                                                  int size) = 0;
  virtual AccountCredentials create_account(const std::string& handle) = 0;
  virtual void set_avatar_png(const std::string& account_id,
                              const std::string& token,
                              std::span<const std::uint8_t> png) = 0;
  virtual SimMinutes now() = 0;
  virtual SimMinutes advance_clock(const std::string& admin_token,
                                   int minutes) = 0;
};

// Replaces the size suffix in an avatar link, the way bots upgrade the
// normal-size link from search results to the 400x400 rendition.
std::string substitute_size_suffix(const std::string& url, int size);

class LocalClient : public OsnClient {
 public:
  explicit LocalClient(Service& service) : service_(service) {}

  std::vector<Trend> trends(const std::string& area,
                            std::optional<SimMinutes> epoch) override {
    return service_.trends(area, epoch);
  }
  SearchPage search(const SearchQuery& q) override { return service_.search(q); }
  Tweet post_tweet(const std::string& token, const std::string& text) override {
    return service_.post_tweet(token, text);
  }
  void delete_tweet(const std::string& token, TweetId id) override {
    service_.delete_tweet(token, id);
  }
  std::vector<std::uint8_t> avatar_by_url(const std::string& url,
                                          int size) override;
  AccountCredentials create_account(const std::string& handle) override {
    return service_.create_account(handle);
  }
  void set_avatar_png(const std::string& account_id, const std::string& token,
                      std::span<const std::uint8_t> png) override {
    service_.set_avatar_png(account_id, token, png);
  }
  SimMinutes now() override { return service_.now(); }
  SimMinutes advance_clock(const std::string& admin_token, int minutes) override;

 private:
  Service& service_;
};

}  // namespace occ::osn

#include "occ/osn/http.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace occ::osn {

namespace {

using nlohmann::json;

json tweet_to_json(const Tweet& t) {
  json j;
  j["id"] = t.id;
  j["author_id"] = t.author_id;
  j["author_handle"] = t.author_handle;
  j["text"] = t.text;
  j["created_at"] = t.created_at;
  j["is_retweet"] = t.is_retweet;
  j["retweet_of"] = t.retweet_of ? json(*t.retweet_of) : json(nullptr);
  j["lang"] = t.lang;
  j["profile_image_url"] = t.avatar_url;
  return j;
}

Tweet tweet_from_json(const json& j) {
  Tweet t;
  t.id = j.at("id").get<TweetId>();
  t.author_id = j.at("author_id").get<std::string>();
  t.author_handle = j.at("author_handle").get<std::string>();
  t.text = j.at("text").get<std::string>();
  t.created_at = j.at("created_at").get<SimMinutes>();
  t.is_retweet = j.at("is_retweet").get<bool>();
  if (!j.at("retweet_of").is_null())
    t.retweet_of = j.at("retweet_of").get<TweetId>();
  t.lang = j.at("lang").get<std::string>();
  t.avatar_url = j.at("profile_image_url").get<std::string>();
  return t;
}

std::string bearer_token(const httplib::Request& req) {
  const std::string auth = req.get_header_value("Authorization");
  constexpr const char* kPrefix = "Bearer ";
  if (auth.rfind(kPrefix, 0) != 0) return "";
  return auth.substr(7);
}

void fail(httplib::Response& res, int status, const std::string& message) {
  json j;
  j["error"] = message;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

// Maps the error taxonomy onto HTTP statuses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const AuthError& e) {
    fail(res, 401, e.what());
  } catch (const ForbiddenError& e) {
    fail(res, 403, e.what());
  } catch (const NotFoundError& e) {
    fail(res, 404, e.what());
  } catch (const RequestError& e) {
    fail(res, 400, e.what());
  } catch (const DomainError& e) {
    fail(res, 400, e.what());
  } catch (const FormatError& e) {
    fail(res, 400, e.what());
  } catch (const std::exception& e) {
    fail(res, 500, e.what());
  }
}

}  // namespace

std::string url_encode(const std::string& value) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : value) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    }
  }
  return out;
}

// --- server ------------------------------------------------------------------

struct HttpServer::Impl {
  Service& svc;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : svc(s) { install_routes(); }

  void install_routes() {
    server.Get("/trends", [this](const httplib::Request& req,
                                 httplib::Response& res) {
      guarded(res, [&] {
        const std::string area = req.get_param_value("area");
        std::optional<SimMinutes> epoch;
        if (req.has_param("epoch"))
          epoch = std::stoll(req.get_param_value("epoch"));
        const std::vector<Trend> list = svc.trends(area, epoch);
        json j;
        j["area"] = area;
        j["as_of"] = epoch.value_or(svc.now());
        j["trends"] = json::array();
        for (const Trend& t : list) {
          json jt;
          jt["topic"] = t.topic;
          jt["tweet_volume"] =
              t.reported_volume ? json(*t.reported_volume) : json(nullptr);
          j["trends"].push_back(std::move(jt));
        }
        res.set_content(j.dump(), "application/json");
      });
    });

    server.Get("/search", [this](const httplib::Request& req,
                                 httplib::Response& res) {
      guarded(res, [&] {
        SearchQuery q;
        q.query = req.get_param_value("q");
        if (req.has_param("lang")) q.lang = req.get_param_value("lang");
        if (req.has_param("count"))
          q.count = std::stoi(req.get_param_value("count"));
        if (req.has_param("cursor")) q.cursor = req.get_param_value("cursor");
        const SearchPage page = svc.search(q);
        json j;
        j["tweets"] = json::array();
        for (const Tweet& t : page.tweets) j["tweets"].push_back(tweet_to_json(t));
        j["next_cursor"] = page.next_cursor ? json(*page.next_cursor) : json(nullptr);
        res.set_content(j.dump(), "application/json");
      });
    });

    server.Post("/tweets", [this](const httplib::Request& req,
                                  httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("text"))
          throw RequestError("POST /tweets: body must be {\"text\": ...}");
        const Tweet t =
            svc.post_tweet(bearer_token(req), body.at("text").get<std::string>());
        res.status = 201;
        res.set_content(tweet_to_json(t).dump(), "application/json");
      });
    });

    server.Delete(R"(/tweets/(\d+))", [this](const httplib::Request& req,
                                             httplib::Response& res) {
      guarded(res, [&] {
        svc.delete_tweet(bearer_token(req), std::stoull(req.matches[1].str()));
        res.set_content("{\"deleted\":true}", "application/json");
      });
    });

    server.Get(R"(/avatars/(.+))", [this](const httplib::Request& req,
                                          httplib::Response& res) {
      guarded(res, [&] {
        const std::vector<std::uint8_t> bytes =
            svc.avatar_by_path(req.matches[1].str());
        res.set_content(reinterpret_cast<const char*>(bytes.data()),
                        bytes.size(), "image/jpeg");
      });
    });

    server.Post("/accounts", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("handle"))
          throw RequestError("POST /accounts: body must be {\"handle\": ...}");
        const AccountCredentials cred =
            svc.create_account(body.at("handle").get<std::string>());
        json j;
        j["account_id"] = cred.account_id;
        j["token"] = cred.token;
        res.status = 201;
        res.set_content(j.dump(), "application/json");
      });
    });

    server.Put(R"(/accounts/([^/]+)/avatar)", [this](const httplib::Request& req,
                                                     httplib::Response& res) {
      guarded(res, [&] {
        const std::span<const std::uint8_t> png(
            reinterpret_cast<const std::uint8_t*>(req.body.data()),
            req.body.size());
        svc.set_avatar_png(req.matches[1].str(), bearer_token(req), png);
        res.set_content("{\"ok\":true}", "application/json");
      });
    });

    server.Get("/clock", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json j;
        j["now"] = svc.now();
        res.set_content(j.dump(), "application/json");
      });
    });

    server.Post("/clock/advance", [this](const httplib::Request& req,
                                         httplib::Response& res) {
      guarded(res, [&] {
        if (!svc.is_admin(bearer_token(req)))
          throw AuthError("clock: admin token required");
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("minutes"))
          throw RequestError("POST /clock/advance: body must be {\"minutes\": n}");
        json j;
        j["now"] = svc.advance_clock(body.at("minutes").get<int>());
        res.set_content(j.dump(), "application/json");
      });
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(new Impl(service)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::run(const std::string& host) {
  impl_->server.listen(host, impl_->svc.config().port);
}

int HttpServer::start_background(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw ConfigError("http server: could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

// --- client ------------------------------------------------------------------

struct HttpClient::Impl {
  httplib::Client cli;
  Impl(const std::string& host, int port) : cli(host, port) {
    cli.set_keep_alive(true);
    cli.set_read_timeout(60, 0);
  }
};

namespace {

[[noreturn]] void raise_for_status(int status, const std::string& body) {
  std::string message = body;
  const json j = json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.contains("error"))
    message = j.at("error").get<std::string>();
  switch (status) {
    case 400: throw RequestError(message);
    case 401: throw AuthError(message);
    case 403: throw ForbiddenError(message);
    case 404: throw NotFoundError(message);
    default: throw ProtocolError("http " + std::to_string(status) + ": " + message);
  }
}

json expect_json(const httplib::Result& result, int expected = 200) {
  if (!result)
    throw ProtocolError("http: transport error " +
                        httplib::to_string(result.error()));
  if (result->status != expected) raise_for_status(result->status, result->body);
  const json j = json::parse(result->body, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("http: malformed JSON response");
  return j;
}

}  // namespace

HttpClient::HttpClient(const std::string& host, int port)
    : impl_(new Impl(host, port)) {}

HttpClient::~HttpClient() = default;

std::vector<Trend> HttpClient::trends(const std::string& area,
                                      std::optional<SimMinutes> epoch) {
  std::string path = "/trends?area=" + url_encode(area);
  if (epoch) path += "&epoch=" + std::to_string(*epoch);
  const json j = expect_json(impl_->cli.Get(path));
  std::vector<Trend> out;
  for (const auto& jt : j.at("trends")) {
    Trend t;
    t.topic = jt.at("topic").get<std::string>();
    t.area = area;
    if (!jt.at("tweet_volume").is_null()) {
      t.reported_volume = jt.at("tweet_volume").get<std::int64_t>();
      t.volume = *t.reported_volume;
    }
    out.push_back(std::move(t));
  }
  return out;
}

SearchPage HttpClient::search(const SearchQuery& q) {
  std::string path = "/search?q=" + url_encode(q.query) +
                     "&lang=" + url_encode(q.lang) +
                     "&count=" + std::to_string(q.count);
  if (!q.cursor.empty()) path += "&cursor=" + url_encode(q.cursor);
  const json j = expect_json(impl_->cli.Get(path));
  SearchPage page;
  for (const auto& jt : j.at("tweets")) page.tweets.push_back(tweet_from_json(jt));
  if (!j.at("next_cursor").is_null())
    page.next_cursor = j.at("next_cursor").get<std::string>();
  return page;
}

Tweet HttpClient::post_tweet(const std::string& token, const std::string& text) {
  json body;
  body["text"] = text;
  httplib::Headers headers = {{"Authorization", "Bearer " + token}};
  const auto result = impl_->cli.Post("/tweets", headers, body.dump(),
                                      "application/json");
  return tweet_from_json(expect_json(result, 201));
}

void HttpClient::delete_tweet(const std::string& token, TweetId id) {
  httplib::Headers headers = {{"Authorization", "Bearer " + token}};
  const auto result =
      impl_->cli.Delete("/tweets/" + std::to_string(id), headers);
  expect_json(result);
}

std::vector<std::uint8_t> HttpClient::avatar_by_url(const std::string& url,
                                                    int size) {
  const std::string resolved = substitute_size_suffix(url, size);
  const auto result = impl_->cli.Get(resolved);
  if (!result)
    throw ProtocolError("http: transport error " +
                        httplib::to_string(result.error()));
  if (result->status != 200) raise_for_status(result->status, result->body);
  return {result->body.begin(), result->body.end()};
}

AccountCredentials HttpClient::create_account(const std::string& handle) {
  json body;
  body["handle"] = handle;
  const auto result =
      impl_->cli.Post("/accounts", body.dump(), "application/json");
  const json j = expect_json(result, 201);
  return AccountCredentials{j.at("account_id").get<std::string>(),
                            j.at("token").get<std::string>()};
}

void HttpClient::set_avatar_png(const std::string& account_id,
                                const std::string& token,
                                std::span<const std::uint8_t> png) {
  httplib::Headers headers = {{"Authorization", "Bearer " + token}};
  const auto result = impl_->cli.Put(
      "/accounts/" + account_id + "/avatar", headers,
      reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  expect_json(result);
}

SimMinutes HttpClient::now() {
  const json j = expect_json(impl_->cli.Get("/clock"));
  return j.at("now").get<SimMinutes>();
}

SimMinutes HttpClient::advance_clock(const std::string& admin_token,
                                     int minutes) {
  json body;
  body["minutes"] = minutes;
  httplib::Headers headers = {{"Authorization", "Bearer " + admin_token}};
  const auto result = impl_->cli.Post("/clock/advance", headers, body.dump(),
                                      "application/json");
  return expect_json(result).at("now").get<SimMinutes>();
}

}  // namespace occ::osn

#pragma once

// cpp-httplib implementation of HttpTransport. Kept apart from the backend
// logic because httplib is heavy to compile; link annonet_live to use it.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "annonet/live_backend.hpp"

namespace annonet {

class HttplibTransport final : public HttpTransport {
public:
  explicit HttplibTransport(const std::string& base_url) : origin_(split_base_url(base_url).first) {}

  HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers,
                    std::chrono::milliseconds timeout) override {
    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type")
        content_type = v;
      else
        h.emplace(k, v);
    }
    auto result = client.Post(path, h, body, content_type);
    if (!result) throw TransportError("HTTP request to " + origin_ + path + " failed: " + httplib::to_string(result.error()));
    return {result->status, result->body};
  }

private:
  std::string origin_;
};

}  // namespace annonet

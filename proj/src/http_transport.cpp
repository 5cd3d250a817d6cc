// Live chat-completion transport over cpp-httplib. Only live/record runs
// touch this; replay mode never constructs a transport.

#ifdef CVSSLAB_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "cvsslab/llm_gateway.hpp"

namespace cvsslab::gateway {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
  bool https = false;
  bool ok = false;
};

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl out;
  std::string rest;
  if (url.rfind("https://", 0) == 0) {
    out.https = true;
    rest = url.substr(8);
  } else if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else {
    return out;
  }
  const std::size_t slash = rest.find('/');
  const std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (host.empty()) return out;
  out.origin = (out.https ? "https://" : "http://") + host;
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  out.ok = true;
  return out;
}

class LiveTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
    HttpResponse out;
    const ParsedUrl parsed = parse_url(url);
    if (!parsed.ok) {
      out.transport_error = true;
      out.error = "bad endpoint url: " + url;
      return out;
    }
#ifndef CVSSLAB_HAVE_OPENSSL
    if (parsed.https) {
      out.transport_error = true;
      out.error = "built without TLS support; https endpoints unavailable";
      return out;
    }
#endif
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);

    httplib::Headers hl;
    std::string content_type = "application/json";
    for (const auto& [name, value] : headers) {
      if (name == "Content-Type")
        content_type = value;
      else
        hl.emplace(name, value);
    }
    auto result = client.Post(parsed.path, hl, body, content_type);
    if (!result) {
      out.transport_error = true;
      out.error = httplib::to_string(result.error());
      return out;
    }
    out.status = result->status;
    out.body = result->body;
    if (result->has_header("Retry-After"))
      out.retry_after = result->get_header_value("Retry-After");
    return out;
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_live_transport() {
  return std::make_unique<LiveTransport>();
}

}  // namespace cvsslab::gateway

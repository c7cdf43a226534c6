#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamperscan/form.hpp"
#include "tamperscan/url.hpp"

namespace httplib {
class Client;
}

namespace tamperscan {

enum class Method { Get, Post };

std::string_view to_string(Method method);

struct HttpRequest {
    Method method = Method::Get;
    std::string url;  // absolute, no query string
    NameValueList query_params;
    NameValueList body_params;
    bool json_body = false;  // body_params sent as a JSON object of strings
    NameValueList headers;

    std::string target() const;  // url plus encoded query
    std::string body() const;
    std::string content_type() const;

    bool operator==(const HttpRequest&) const = default;
};

struct HttpResponse {
    int status = 0;
    std::string content_type;
    std::string body;
    NameValueList headers;
    std::string final_url;  // after redirects

    bool operator==(const HttpResponse&) const = default;
};

struct Cookie {
    std::string name;
    std::string value;
    std::string path = "/";
    std::optional<std::chrono::system_clock::time_point> expires;
};

// Cookies keyed by host. Server-set cookies are echoed on same-host requests whose
// path matches; they are never exposed as mutable scan parameters.
class CookieJar {
public:
    void store(const Url& request_url, std::string_view set_cookie);
    std::string header_for(const Url& url) const;
    std::vector<Cookie> cookies_for(const Url& url) const;
    void clear() { jar_.clear(); }
    bool empty() const { return jar_.empty(); }

private:
    std::map<std::string, std::map<std::string, Cookie>> jar_;
};

struct SessionOptions {
    std::chrono::milliseconds delay{0};
    int max_redirects = 5;
    std::chrono::seconds timeout{10};
};

// One scan's HTTP state. Movable, not shareable across threads concurrently.
class Session {
public:
    explicit Session(SessionOptions options = {});
    ~Session();
    Session(Session&&) noexcept;
    Session& operator=(Session&&) noexcept;

    // Throws TransportError on connection failure. Any HTTP status is a response.
    HttpResponse send(const HttpRequest& request);

    CookieJar& jar() { return jar_; }
    const CookieJar& jar() const { return jar_; }
    std::size_t requests_sent() const { return requests_sent_; }
    const SessionOptions& options() const { return options_; }

private:
    httplib::Client& client_for(const Url& url);

    SessionOptions options_;
    CookieJar jar_;
    std::map<std::string, std::unique_ptr<httplib::Client>> clients_;
    std::size_t requests_sent_ = 0;
};

// Form controls in document order with the supplied values, plus the query
// string hard-coded in the action. `query_overrides` replaces action query values
// by name. Throws ConfigError for a relative action without a base URL.
HttpRequest build_submission(const Form& form, const FieldValues& values, std::string_view page_url,
                             const FieldValues& query_overrides = {});

// The parameters `build_submission` would send, tagged with their source.
std::vector<Param> submission_params(const Form& form, const FieldValues& values, std::string_view page_url,
                                     const FieldValues& query_overrides = {});

}  // namespace tamperscan

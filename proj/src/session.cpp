#include "tamperscan/session.hpp"

#include <algorithm>
#include <charconv>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

std::string_view to_string(Method method) { return method == Method::Get ? "GET" : "POST"; }

std::string HttpRequest::target() const {
    return query_params.empty() ? url : url + "?" + form_encode(query_params);
}

std::string HttpRequest::body() const {
    if (method == Method::Get) return {};
    if (json_body) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (const auto& [k, v] : body_params) obj[k] = v;
        return obj.dump();
    }
    return form_encode(body_params);
}

std::string HttpRequest::content_type() const {
    if (method == Method::Get) return {};
    return json_body ? "application/json" : "application/x-www-form-urlencoded";
}

// ---- cookies ---------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<std::chrono::system_clock::time_point> parse_http_date(const std::string& text) {
    std::tm tm{};
    std::istringstream in(text);
    in >> std::get_time(&tm, "%a, %d %b %Y %H:%M:%S");
    if (in.fail()) return std::nullopt;
    return std::chrono::system_clock::from_time_t(timegm(&tm));
}

bool path_matches(const std::string& cookie_path, const std::string& request_path) {
    if (request_path.rfind(cookie_path, 0) != 0) return false;
    return request_path.size() == cookie_path.size() || cookie_path.back() == '/' ||
           request_path[cookie_path.size()] == '/';
}

}  // namespace

void CookieJar::store(const Url& request_url, std::string_view set_cookie) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= set_cookie.size()) {
        auto semi = set_cookie.find(';', pos);
        if (semi == std::string_view::npos) semi = set_cookie.size();
        parts.push_back(trim(set_cookie.substr(pos, semi - pos)));
        pos = semi + 1;
    }
    if (parts.empty()) return;
    auto eq = parts[0].find('=');
    if (eq == std::string::npos || eq == 0) return;

    Cookie cookie;
    cookie.name = trim(parts[0].substr(0, eq));
    cookie.value = trim(parts[0].substr(eq + 1));
    auto slash = request_url.path.rfind('/');
    cookie.path = slash == 0 || slash == std::string::npos ? "/" : request_url.path.substr(0, slash);
    auto now = std::chrono::system_clock::now();
    bool have_max_age = false;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        auto aeq = parts[i].find('=');
        std::string key = lower(trim(parts[i].substr(0, aeq)));
        std::string value = aeq == std::string::npos ? "" : trim(parts[i].substr(aeq + 1));
        if (key == "path" && !value.empty() && value[0] == '/') {
            cookie.path = value;
        } else if (key == "max-age") {
            long long seconds = 0;
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seconds);
            if (ec == std::errc{} && ptr == value.data() + value.size()) {
                cookie.expires = now + std::chrono::seconds(seconds);
                have_max_age = true;
            }
        } else if (key == "expires" && !have_max_age) {
            if (auto when = parse_http_date(value)) cookie.expires = *when;
        }
    }
    auto& host = jar_[request_url.host];
    if (cookie.expires && *cookie.expires <= now) {
        host.erase(cookie.name);
        return;
    }
    host[cookie.name] = std::move(cookie);
}

std::vector<Cookie> CookieJar::cookies_for(const Url& url) const {
    std::vector<Cookie> out;
    auto it = jar_.find(url.host);
    if (it == jar_.end()) return out;
    auto now = std::chrono::system_clock::now();
    for (const auto& [name, cookie] : it->second) {
        if (cookie.expires && *cookie.expires <= now) continue;
        if (path_matches(cookie.path, url.path)) out.push_back(cookie);
    }
    return out;
}

std::string CookieJar::header_for(const Url& url) const {
    std::string out;
    for (const auto& c : cookies_for(url)) {
        if (!out.empty()) out += "; ";
        out += c.name + "=" + c.value;
    }
    return out;
}

// ---- session ---------------------------------------------------------------

Session::Session(SessionOptions options) : options_(options) {}
Session::~Session() = default;
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

httplib::Client& Session::client_for(const Url& url) {
    if (url.scheme != "http") throw ConfigError("only http:// targets are supported: " + url.to_string());
    auto key = url.origin();
    auto it = clients_.find(key);
    if (it == clients_.end()) {
        auto client = std::make_unique<httplib::Client>(url.host, url.port);
        client->set_connection_timeout(options_.timeout);
        client->set_read_timeout(options_.timeout);
        client->set_write_timeout(options_.timeout);
        client->set_keep_alive(true);
        client->set_tcp_nodelay(true);
        it = clients_.emplace(key, std::move(client)).first;
    }
    return *it->second;
}

HttpResponse Session::send(const HttpRequest& request) {
    if (options_.delay.count() > 0) std::this_thread::sleep_for(options_.delay);

    Url url = Url::parse(request.target());
    Method method = request.method;
    std::string body = request.body();
    std::string content_type = request.content_type();

    for (int hop = 0;; ++hop) {
        httplib::Headers headers;
        for (const auto& [k, v] : request.headers) headers.emplace(k, v);
        if (auto cookie = jar_.header_for(url); !cookie.empty()) headers.emplace("Cookie", cookie);

        auto& client = client_for(url);
        auto result = method == Method::Get
                          ? client.Get(url.path_and_query(), headers)
                          : client.Post(url.path_and_query(), headers, body, content_type.c_str());
        if (!result) {
            throw TransportError(std::string(to_string(method)) + " " + url.to_string() + ": " +
                                 httplib::to_string(result.error()));
        }
        ++requests_sent_;
        const auto& res = result.value();
        for (std::size_t i = 0, n = res.get_header_value_count("Set-Cookie"); i < n; ++i) {
            jar_.store(url, res.get_header_value("Set-Cookie", i));
        }
        spdlog::debug("{} {} -> {}", to_string(method), url.to_string(), res.status);

        bool redirect = res.status == 301 || res.status == 302 || res.status == 303 || res.status == 307 ||
                        res.status == 308;
        if (redirect && res.has_header("Location") && hop < options_.max_redirects) {
            url = resolve(url, res.get_header_value("Location"));
            if (res.status != 307 && res.status != 308) {
                method = Method::Get;
                body.clear();
                content_type.clear();
            }
            continue;
        }

        HttpResponse response;
        response.status = res.status;
        response.content_type = res.get_header_value("Content-Type");
        response.body = res.body;
        for (const auto& [k, v] : res.headers) response.headers.emplace_back(k, v);
        response.final_url = url.to_string();
        return response;
    }
}

// ---- submissions -----------------------------------------------------------

namespace {

struct Built {
    HttpRequest request;
    std::vector<Param> params;
};

Built build(const Form& form, const FieldValues& values, std::string_view page_url,
            const FieldValues& query_overrides) {
    Url action;
    if (is_absolute_url(form.action)) {
        action = Url::parse(form.action);
    } else if (page_url.empty()) {
        throw ConfigError("form action '" + form.action + "' is relative and no page URL is known");
    } else {
        action = resolve(Url::parse(page_url), form.action);
    }

    Built out;
    out.request.method = form.method == "post" ? Method::Post : Method::Get;
    out.request.url = action.without_query();
    out.request.json_body = form.mode == SubmissionMode::Ajax && out.request.method == Method::Post;
    if (out.request.json_body) out.request.headers.emplace_back("X-Requested-With", "XMLHttpRequest");

    for (auto [name, value] : form_decode(action.query)) {
        if (auto it = query_overrides.find(name); it != query_overrides.end()) value = it->second;
        out.params.push_back({name, value, ParamSource::QueryString, Locator::form_control(form.index, name)});
        out.request.query_params.emplace_back(std::move(name), std::move(value));
    }

    std::vector<std::string> seen;
    for (const auto& c : form.controls) {
        if (std::find(seen.begin(), seen.end(), c.name) != seen.end()) continue;
        seen.push_back(c.name);
        auto it = values.find(c.name);
        bool toggles = c.kind == ControlKind::Radio || c.kind == ControlKind::Checkbox;
        if (it == values.end() && toggles) continue;
        std::string value = it == values.end() ? std::string() : it->second;
        out.params.push_back({c.name, value, c.source(), c.locator});
        auto& target = out.request.method == Method::Get ? out.request.query_params : out.request.body_params;
        target.emplace_back(c.name, std::move(value));
    }
    return out;
}

}  // namespace

HttpRequest build_submission(const Form& form, const FieldValues& values, std::string_view page_url,
                             const FieldValues& query_overrides) {
    return build(form, values, page_url, query_overrides).request;
}

std::vector<Param> submission_params(const Form& form, const FieldValues& values, std::string_view page_url,
                                     const FieldValues& query_overrides) {
    return build(form, values, page_url, query_overrides).params;
}

}  // namespace tamperscan

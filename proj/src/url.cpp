#include "tamperscan/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "tamperscan/errors.hpp"

namespace tamperscan {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

int default_port(std::string_view scheme) { return scheme == "https" ? 443 : 80; }

std::string strip_fragment(std::string_view s) {
    auto hash = s.find('#');
    return std::string(s.substr(0, hash));
}

// Removes "." and ".." segments (RFC 3986 5.2.4).
std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    bool trailing_slash = false;
    while (pos <= path.size()) {
        auto next = path.find('/', pos);
        if (next == std::string_view::npos) next = path.size();
        std::string_view seg = path.substr(pos, next - pos);
        trailing_slash = false;
        if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing_slash = true;
        } else if (seg == ".") {
            trailing_slash = true;
        } else if (!seg.empty()) {
            out.emplace_back(seg);
        } else if (next == path.size() && pos != 0) {
            trailing_slash = true;
        }
        pos = next + 1;
    }
    std::string result;
    for (const auto& seg : out) result += "/" + seg;
    if (result.empty() || trailing_slash) result += "/";
    return result;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

bool is_absolute_url(std::string_view text) {
    auto colon = text.find("://");
    if (colon == std::string_view::npos || colon == 0) return false;
    return std::all_of(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(colon), [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '-' || c == '.';
    });
}

Url Url::parse(std::string_view absolute) {
    std::string text = strip_fragment(absolute);
    if (!is_absolute_url(text)) {
        throw ConfigError("not an absolute URL: '" + std::string(absolute) + "'");
    }
    Url url;
    auto sep = text.find("://");
    url.scheme = lower(text.substr(0, sep));
    if (url.scheme != "http" && url.scheme != "https") {
        throw ConfigError("unsupported URL scheme: " + url.scheme);
    }
    std::string_view rest = std::string_view(text).substr(sep + 3);
    auto path_start = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, path_start);
    std::string_view tail = path_start == std::string_view::npos ? std::string_view{} : rest.substr(path_start);

    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
    url.port = default_port(url.scheme);
    if (auto colon = authority.rfind(':'); colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        auto port_text = authority.substr(colon + 1);
        int port = 0;
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
            throw ConfigError("bad port in URL: '" + std::string(absolute) + "'");
        }
        url.port = port;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw ConfigError("URL has no host: '" + std::string(absolute) + "'");
    url.host = lower(authority);

    auto q = tail.find('?');
    std::string_view path = tail.substr(0, q);
    url.path = path.empty() ? "/" : remove_dot_segments(path);
    if (q != std::string_view::npos) url.query = std::string(tail.substr(q + 1));
    return url;
}

std::string Url::origin() const {
    std::string out = scheme + "://" + host;
    if (port != default_port(scheme)) out += ":" + std::to_string(port);
    return out;
}

std::string Url::path_and_query() const { return query.empty() ? path : path + "?" + query; }

std::string Url::to_string() const { return origin() + path_and_query(); }

std::string Url::without_query() const { return origin() + path; }

Url resolve(const Url& base, std::string_view reference) {
    std::string ref = strip_fragment(reference);
    // Surrounding whitespace is ignored in attribute URLs.
    auto first = ref.find_first_not_of(" \t\r\n");
    auto last = ref.find_last_not_of(" \t\r\n");
    ref = first == std::string::npos ? std::string{} : ref.substr(first, last - first + 1);

    if (is_absolute_url(ref)) return Url::parse(ref);
    if (ref.rfind("//", 0) == 0) return Url::parse(base.scheme + ":" + ref);

    Url out = base;
    if (ref.empty()) return out;
    if (ref[0] == '?') {
        out.query = ref.substr(1);
        return out;
    }
    auto q = ref.find('?');
    std::string path = ref.substr(0, q);
    out.query = q == std::string::npos ? std::string{} : ref.substr(q + 1);
    if (path.empty()) return out;
    if (path[0] == '/') {
        out.path = remove_dot_segments(path);
    } else {
        auto dir_end = base.path.rfind('/');
        std::string dir = dir_end == std::string::npos ? "/" : base.path.substr(0, dir_end + 1);
        out.path = remove_dot_segments(dir + path);
    }
    return out;
}

std::string percent_encode(std::string_view raw, bool space_as_plus) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(raw.size() * 3);
    for (unsigned char c : raw) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else if (c == ' ' && space_as_plus) {
            out.push_back('+');
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0x0F]);
        }
    }
    return out;
}

std::string percent_decode(std::string_view encoded, bool plus_as_space) {
    std::string out;
    out.reserve(encoded.size());
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        char c = encoded[i];
        if (c == '%' && i + 2 < encoded.size()) {
            int hi = hex_value(encoded[i + 1]);
            int lo = hex_value(encoded[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>((hi << 4) | lo));
                i += 2;
                continue;
            }
        }
        out.push_back(plus_as_space && c == '+' ? ' ' : c);
    }
    return out;
}

std::string form_encode(const NameValueList& pairs) {
    std::string out;
    for (const auto& [name, value] : pairs) {
        if (!out.empty()) out.push_back('&');
        out += percent_encode(name, true);
        out.push_back('=');
        out += percent_encode(value, true);
    }
    return out;
}

NameValueList form_decode(std::string_view encoded) {
    NameValueList out;
    std::size_t pos = 0;
    while (pos < encoded.size()) {
        auto amp = encoded.find('&', pos);
        if (amp == std::string_view::npos) amp = encoded.size();
        std::string_view pair = encoded.substr(pos, amp - pos);
        if (!pair.empty()) {
            auto eq = pair.find('=');
            std::string_view name = pair.substr(0, eq);
            std::string_view value = eq == std::string_view::npos ? std::string_view{} : pair.substr(eq + 1);
            out.emplace_back(percent_decode(name, true), percent_decode(value, true));
        }
        pos = amp + 1;
    }
    return out;
}

}  // namespace tamperscan

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tamperscan {

using NameValueList = std::vector<std::pair<std::string, std::string>>;

// Absolute http(s) URL split into the parts the scanner needs. Fragments are dropped.
struct Url {
    std::string scheme;
    std::string host;
    int port = 80;
    std::string path = "/";
    std::string query;  // raw, without the leading '?'

    static Url parse(std::string_view absolute);

    std::string origin() const;
    std::string path_and_query() const;
    std::string to_string() const;
    // URL without its query string.
    std::string without_query() const;

    bool operator==(const Url&) const = default;
};

bool is_absolute_url(std::string_view text);

// RFC 3986 reference resolution against an absolute base.
Url resolve(const Url& base, std::string_view reference);

// Unreserved characters pass through; everything else is %XX (upper-case hex).
// With space_as_plus, ' ' becomes '+' (application/x-www-form-urlencoded).
std::string percent_encode(std::string_view raw, bool space_as_plus = false);
// Invalid escapes are kept literally. With plus_as_space, '+' decodes to ' '.
std::string percent_decode(std::string_view encoded, bool plus_as_space = false);

std::string form_encode(const NameValueList& pairs);
NameValueList form_decode(std::string_view encoded);

}  // namespace tamperscan

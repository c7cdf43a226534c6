#include "tamperscan/mutate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <random>
#include <regex>
#include <set>

#include "tamperscan/errors.hpp"
#include "tamperscan/features.hpp"

namespace tamperscan {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    return std::string(s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1));
}

bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
    std::string h = lower(haystack);
    return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return h.find(n) != std::string::npos; });
}

std::optional<InputTypeHint> hint_from_words(std::string_view text) {
    if (text.empty()) return std::nullopt;
    if (contains_any(text, {"date", "day"})) return InputTypeHint::Date;
    if (contains_any(text, {"time", "hour"})) return InputTypeHint::Time;
    if (contains_any(text, {"percent", "pct", "rate"})) return InputTypeHint::Percentage;
    if (contains_any(text, {"amount", "amt", "qty", "quantity", "price", "number", "num", "count"})) return InputTypeHint::Number;
    return std::nullopt;
}

std::optional<InputTypeHint> hint_from_class(std::string_view cls) {
    if (cls.empty()) return std::nullopt;
    if (contains_any(cls, {"alphanumeric", "alnum"})) return InputTypeHint::AlphaNumeric;
    if (contains_any(cls, {"datepicker", "date"})) return InputTypeHint::Date;
    if (contains_any(cls, {"timepicker", "time"})) return InputTypeHint::Time;
    if (contains_any(cls, {"percent"})) return InputTypeHint::Percentage;
    if (contains_any(cls, {"numeric", "number", "amount", "currency"})) return InputTypeHint::Number;
    if (contains_any(cls, {"bool", "toggle"})) return InputTypeHint::Boolean;
    return std::nullopt;
}

std::optional<InputTypeHint> hint_from_value(std::string_view raw) {
    static const std::set<std::string> booleans{"1", "0", "y", "n", "t", "f", "true", "false"};
    static const std::regex number(R"([\d,\.]+)");
    static const std::regex date(R"(\d{4}-\d{1,2}-\d{1,2}|\d{1,2}/\d{1,2}/\d{2,4})");
    static const std::regex time(R"(\d{1,2}:\d{2}(?::\d{2})?)");
    static const std::regex percent(R"(-?[\d.]+\s*%)");
    std::string v = trim(raw);
    if (v.empty()) return std::nullopt;
    if (booleans.contains(lower(v))) return InputTypeHint::Boolean;
    if (std::regex_match(v, number)) return InputTypeHint::Number;
    if (std::regex_match(v, date)) return InputTypeHint::Date;
    if (std::regex_match(v, time)) return InputTypeHint::Time;
    if (std::regex_match(v, percent)) return InputTypeHint::Percentage;
    return std::nullopt;
}

std::string format_number(double v) {
    if (v == 0) v = 0;  // no "-0"
    char buf[512];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    if (ec != std::errc()) return std::to_string(v);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

class CandidateList {
public:
    explicit CandidateList(std::string_view base) : base_(base) {}

    void add(std::string value, std::string rule) {
        if (value == base_ || !seen_.insert(value).second) return;
        out_.push_back({std::move(value), std::move(rule), base_});
    }

    std::vector<MutationCandidate> take() { return std::move(out_); }

private:
    std::string base_;
    std::set<std::string> seen_;
    std::vector<MutationCandidate> out_;
};

}  // namespace

std::string_view to_string(InputTypeHint hint) {
    switch (hint) {
        case InputTypeHint::Number: return "number";
        case InputTypeHint::Boolean: return "boolean";
        case InputTypeHint::Date: return "date";
        case InputTypeHint::Time: return "time";
        case InputTypeHint::Percentage: return "percentage";
        case InputTypeHint::AlphaNumeric: return "alphanumeric";
        case InputTypeHint::FreeText: return "free-text";
    }
    return "free-text";
}

TypeInference infer_type(const InputControl& control, std::string_view value) {
    if (auto h = hint_from_value(value)) return {*h, "value"};

    const std::string& type = control.type_attr;
    if (type == "number" || type == "range") return {InputTypeHint::Number, "type"};
    if (type == "date" || type == "datetime-local" || type == "month" || type == "week") return {InputTypeHint::Date, "type"};
    if (type == "time") return {InputTypeHint::Time, "type"};
    if (control.kind == ControlKind::Checkbox) return {InputTypeHint::Boolean, "type"};

    if (auto h = hint_from_class(control.class_attr)) return {*h, "class"};
    if (auto h = hint_from_words(control.name)) return {*h, "name"};
    if (auto h = hint_from_words(control.label)) return {*h, "label"};

    static const std::regex alnum("[A-Za-z0-9]+");
    std::string v(value);
    if (std::regex_match(v, alnum)) return {InputTypeHint::AlphaNumeric, "fallback"};
    return {InputTypeHint::FreeText, "fallback"};
}

std::string negate_boolean(std::string_view value) {
    if (value == "1") return "0";
    if (value == "0") return "1";
    std::string l = lower(value);
    std::string flipped;
    if (l == "y") flipped = "n";
    else if (l == "n") flipped = "y";
    else if (l == "t") flipped = "f";
    else if (l == "f") flipped = "t";
    else if (l == "true") flipped = "false";
    else if (l == "false") flipped = "true";
    else return std::string(value);

    bool all_upper = std::all_of(value.begin(), value.end(), [](unsigned char c) { return std::isupper(c); });
    bool capitalized = !all_upper && std::isupper(static_cast<unsigned char>(value.front()));
    if (all_upper) {
        std::transform(flipped.begin(), flipped.end(), flipped.begin(), [](unsigned char c) { return std::toupper(c); });
    } else if (capitalized) {
        flipped.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(flipped.front())));
    }
    return flipped;
}

std::optional<std::pair<std::size_t, std::size_t>> numeric_portion(std::string_view value) {
    static const std::regex number(R"(\d[\d,]*(?:\.\d+)?)");
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::cregex_iterator it(value.data(), value.data() + value.size(), number), end; it != end; ++it) {
        std::size_t pos = static_cast<std::size_t>(it->position());
        std::size_t len = static_cast<std::size_t>(it->length());
        while (len > 1 && value[pos + len - 1] == ',') --len;
        // A minus is a sign only at the start of the value or after whitespace.
        if (pos > 0 && value[pos - 1] == '-' &&
            (pos == 1 || std::isspace(static_cast<unsigned char>(value[pos - 2])))) {
            --pos;
            ++len;
        }
        if (!best || len > best->second) best = {{pos, len}};
    }
    return best;
}

const std::array<std::string_view, 12>& static_tamper_list() {
    static const std::array<std::string_view, 12> list{
        "",     "0",   "-1",   "99999999999999999999", "-99999999999999999999", "0.0001",
        "1e9",  "'",   "\"",   "<tamper>",             "null",                  "%00",
    };
    return list;
}

std::array<long long, 2> seeded_integers(std::uint64_t seed, std::string_view name) {
    std::mt19937_64 rng(seed ^ fnv1a(name));
    std::array<long long, 2> out{};
    for (auto& v : out) v = 2 + static_cast<long long>(rng() % 999);
    return out;
}

std::vector<MutationCandidate> mutate(const InputControl& control, std::string_view base, InputTypeHint hint,
                                      const MutateOptions& options) {
    CandidateList list(base);
    const std::string b(base);

    if (auto portion = numeric_portion(b)) {
        auto [pos, len] = *portion;
        std::string digits = b.substr(pos, len);
        digits.erase(std::remove(digits.begin(), digits.end(), ','), digits.end());
        double n = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && std::isfinite(n)) {
            auto splice = [&](double v) { return b.substr(0, pos) + format_number(v) + b.substr(pos + len); };
            list.add(splice(std::trunc(n)), "truncate");
            list.add(splice(n / 1000), "divide-1000");
            list.add(splice(-n), "negate");
            list.add(splice(n + 1), "increment");
            list.add(splice(n - 1), "decrement");
            auto extra = seeded_integers(options.seed, control.name);
            for (long long k : {7LL, 100LL, extra[0], extra[1]}) {
                list.add(splice(n + static_cast<double>(k)), "add-" + std::to_string(k));
                list.add(splice(n * static_cast<double>(k)), "multiply-" + std::to_string(k));
            }
        }
    }

    switch (hint) {
        case InputTypeHint::Boolean: list.add(negate_boolean(trim(b)), "negate-bool"); break;
        case InputTypeHint::Date: list.add("2013-9-22", "hardcoded-date"); break;
        case InputTypeHint::Time: list.add("23:59", "hardcoded-time"); break;
        case InputTypeHint::Percentage: list.add("111%", "hardcoded-percent"); break;
        default: break;
    }

    for (auto v : static_tamper_list()) list.add(std::string(v), "static-list");

    if (options.violate_restrictions) {
        if (control.required) list.add("", "violate-required");
        if (control.maxlength) {
            std::string seed_text = b.empty() ? std::string("A") : b;
            std::string longer = seed_text;
            while (longer.size() <= *control.maxlength) longer += seed_text;
            list.add(longer, "violate-maxlength");
        }
    }
    return list.take();
}

MutationCandidate next_differing(const InputControl& control, std::string_view base, std::string_view avoid,
                                 const MutateOptions& options) {
    auto hint = infer_type(control, base).hint;
    auto candidates = mutate(control, base, hint, options);
    auto avoided = normalize_value(avoid);
    auto differs = [&](const MutationCandidate& c) { return !(normalize_value(c.value) == avoided); };

    auto inc = std::find_if(candidates.begin(), candidates.end(),
                            [](const MutationCandidate& c) { return c.rule == "increment"; });
    if (inc != candidates.end() && differs(*inc)) return *inc;
    auto it = std::find_if(candidates.begin(), candidates.end(), differs);
    if (it == candidates.end()) {
        throw ScanError("no mutation of '" + control.name + "' differs from '" + std::string(avoid) + "'");
    }
    return *it;
}

}  // namespace tamperscan

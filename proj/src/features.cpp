#include "tamperscan/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <regex>

#include "tamperscan/errors.hpp"

namespace tamperscan {

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(first, last - first + 1));
}

const std::regex& numeric_value_regex() {
    static const std::regex re(R"(^[\d,]+(?:\.\d+)?$)");
    return re;
}

}  // namespace

bool is_numeric_value(std::string_view value) {
    return std::regex_match(value.begin(), value.end(), numeric_value_regex());
}

bool operator==(const NormalizedValue& a, const NormalizedValue& b) {
    if (a.numeric != b.numeric) return false;
    return a.numeric ? a.number == b.number : a.text == b.text;
}

NormalizedValue normalize_value(std::string_view value) {
    NormalizedValue out;
    if (!is_numeric_value(value)) {
        out.text = trim(value);
        return out;
    }
    out.numeric = true;
    std::string stripped;
    std::copy_if(value.begin(), value.end(), std::back_inserter(stripped), [](char c) { return c != ','; });
    // parseFloat semantics: longest numeric prefix, NaN when there is none.
    auto [ptr, ec] = std::from_chars(stripped.data(), stripped.data() + stripped.size(), out.number);
    if (ptr == stripped.data()) {
        out.number = std::numeric_limits<double>::quiet_NaN();
    } else if (ec == std::errc::result_out_of_range) {
        out.number = std::numeric_limits<double>::infinity();
    }
    return out;
}

std::string_view to_string(MatchMode mode) { return mode == MatchMode::Numeric ? "numeric" : "string"; }

MatchMode match_mode_from_string(std::string_view text) {
    if (text == "numeric") return MatchMode::Numeric;
    if (text == "string") return MatchMode::String;
    throw ParseError("unknown match mode '" + std::string(text) + "'");
}

MatchMode match_mode_for(std::string_view value) {
    return is_numeric_value(trim(value)) ? MatchMode::Numeric : MatchMode::String;
}

std::string numeric_reflection_pattern(std::string_view value) {
    std::string out;
    for (char c : value) {
        if (c < '0' || c > '9') continue;
        if (!out.empty()) out += "[^\\d]?";
        out.push_back(c);
    }
    return out;
}

ReflectionHits find_reflections(const std::vector<LeafText>& leaves, std::string_view value, MatchMode mode) {
    ReflectionHits hits;
    if (mode == MatchMode::Numeric) {
        std::string pattern = numeric_reflection_pattern(value);
        if (!pattern.empty()) {
            std::regex re(pattern);
            for (const auto& leaf : leaves) {
                auto n = std::distance(std::sregex_iterator(leaf.text.begin(), leaf.text.end(), re), std::sregex_iterator());
                if (n > 0) {
                    hits.count += static_cast<int>(n);
                    hits.where.push_back(leaf.where);
                }
            }
            return hits;
        }
        // No digits at all: fall through to a plain search.
    }
    std::string needle = trim(value);
    if (needle.empty()) return hits;
    for (const auto& leaf : leaves) {
        int n = 0;
        for (auto pos = leaf.text.find(needle); pos != std::string::npos; pos = leaf.text.find(needle, pos + needle.size())) {
            ++n;
        }
        if (n > 0) {
            hits.count += n;
            hits.where.push_back(leaf.where);
        }
    }
    return hits;
}

bool positive_keyword(std::string_view text) {
    static const std::regex re(R"(\b(?:success(?:ful)?|done|completed?|executed?|ok(?:ay)?|updated?)\b)",
                               std::regex::ECMAScript | std::regex::icase);
    return std::regex_search(text.begin(), text.end(), re);
}

bool negative_keyword(std::string_view text) {
    static const std::regex re(R"(\b(?:not|sorry|fail(?:ed)?|err(?:or)?)\b|(?:[a-z]n't\b))",
                               std::regex::ECMAScript | std::regex::icase);
    return std::regex_search(text.begin(), text.end(), re);
}

bool keyword_accepts(std::string_view text) { return positive_keyword(text) && !negative_keyword(text); }

const StepFeatures* FeatureSet::for_step(int step) const {
    for (const auto& s : steps) {
        if (s.step == step) return &s;
    }
    return nullptr;
}

bool button_present(const ParsedBody& page, const Locator& button) {
    const auto* doc = page.html();
    if (!doc) return false;
    return form_of_button(extract_forms(*doc), button).has_value();
}

Classification classify_step(const StepFeatures& features, const TraceStep& step) {
    Classification out;
    auto leaves = step.body.leaves();

    if (features.next_button) {
        if (button_present(step.next_page, *features.next_button)) {
            out.matched.push_back("button " + features.next_button->to_string());
        } else {
            out.missing.push_back("button");
        }
    }
    for (const auto& r : features.reflections) {
        auto submitted = std::find_if(step.params.begin(), step.params.end(),
                                      [&](const Param& p) { return p.name == r.param; });
        ReflectionHits hits;
        if (submitted != step.params.end()) {
            // Mode follows the captured feature unless the submitted value has no digits.
            MatchMode mode = r.mode == MatchMode::Numeric && is_numeric_value(trim(submitted->value))
                                 ? MatchMode::Numeric
                                 : MatchMode::String;
            hits = find_reflections(leaves, submitted->value, mode);
        }
        if (hits.count > 0) {
            out.matched.push_back("reflection " + r.param + " @ " + hits.where.front().to_string());
        } else {
            out.missing.push_back("reflection:" + r.param);
        }
    }
    if (features.keyword) {
        auto it = std::find_if(leaves.begin(), leaves.end(), [](const LeafText& l) { return keyword_accepts(l.text); });
        if (it != leaves.end()) {
            out.matched.push_back("keyword @ " + it->where.to_string());
        } else {
            out.missing.push_back("keyword");
        }
    }
    if (features.accept_regex) {
        std::regex re(*features.accept_regex, std::regex::ECMAScript);
        bool hit = std::regex_search(step.response.body, re);
        (hit ? out.matched : out.missing).push_back(hit ? "regex " + *features.accept_regex : "regex");
    }
    if (features.status_only) {
        bool ok = step.response.status >= 200 && step.response.status < 300;
        (ok ? out.matched : out.missing).push_back(ok ? "status " + std::to_string(step.response.status) : "status");
    }
    out.accepted = !features.empty() && out.missing.empty();
    return out;
}

}  // namespace tamperscan

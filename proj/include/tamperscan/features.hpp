#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamperscan/action_script.hpp"
#include "tamperscan/html.hpp"

namespace tamperscan {

// ---- value normalization (dependency detection) ----------------------------

// `^[\d,]+(?:\.\d+)?$`
bool is_numeric_value(std::string_view value);

// Numbers compare by value after stripping commas; everything else compares trimmed.
// A numeric value that fails to parse is NaN and equals nothing.
struct NormalizedValue {
    bool numeric = false;
    double number = 0;
    std::string text;

    friend bool operator==(const NormalizedValue& a, const NormalizedValue& b);
};

NormalizedValue normalize_value(std::string_view value);

// ---- reflection and keyword detectors --------------------------------------

enum class MatchMode { Numeric, String };

std::string_view to_string(MatchMode mode);
MatchMode match_mode_from_string(std::string_view text);
MatchMode match_mode_for(std::string_view value);

// "12345" -> `1[^\d]?2[^\d]?3[^\d]?4[^\d]?5`. Non-digits in the value are dropped.
std::string numeric_reflection_pattern(std::string_view value);

struct ReflectionHits {
    int count = 0;
    std::vector<Locator> where;
};

// Non-overlapping occurrences of `value` across all leaves.
ReflectionHits find_reflections(const std::vector<LeafText>& leaves, std::string_view value, MatchMode mode);

bool positive_keyword(std::string_view text);
bool negative_keyword(std::string_view text);
// Positive keyword present and no negative keyword, in the same string.
bool keyword_accepts(std::string_view text);

// ---- feature set -----------------------------------------------------------

struct ReflectionFeature {
    std::string param;
    MatchMode mode = MatchMode::String;
    int occurrences = 0;
    std::vector<Locator> where;

    bool operator==(const ReflectionFeature&) const = default;
};

// Evidence that step `step` was accepted, looked for in that step's response.
struct StepFeatures {
    int step = 0;
    std::optional<Locator> next_button;  // submit control clicked at step+1
    std::vector<ReflectionFeature> reflections;
    bool keyword = false;
    std::optional<std::string> accept_regex;
    bool status_only = false;  // empty bodies: 2xx is acceptance

    bool empty() const {
        return !next_button && reflections.empty() && !keyword && !accept_regex && !status_only;
    }
    bool operator==(const StepFeatures&) const = default;
};

struct FeatureSet {
    std::vector<StepFeatures> steps;

    const StepFeatures* for_step(int step) const;
    bool operator==(const FeatureSet&) const = default;
};

struct Classification {
    bool accepted = false;
    std::vector<std::string> matched;  // "button #confirm", "reflection TO @ path:..", ...
    std::vector<std::string> missing;  // "button", "reflection:TO", "keyword", "regex", "status"
};

// Every feature of the step must be located in the step's response; reflection
// features are instantiated with the values actually submitted in `step`.
Classification classify_step(const StepFeatures& features, const TraceStep& step);

bool button_present(const ParsedBody& page, const Locator& button);

}  // namespace tamperscan

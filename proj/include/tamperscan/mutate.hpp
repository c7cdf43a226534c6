#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamperscan/form.hpp"

namespace tamperscan {

enum class InputTypeHint { Number, Boolean, Date, Time, Percentage, AlphaNumeric, FreeText };

std::string_view to_string(InputTypeHint hint);

struct TypeInference {
    InputTypeHint hint = InputTypeHint::FreeText;
    std::string provenance;  // value, type, class, name, label, fallback

    bool operator==(const TypeInference&) const = default;
};

// value regex -> type attribute -> class attribute -> name attribute -> label text.
TypeInference infer_type(const InputControl& control, std::string_view value);

struct MutationCandidate {
    std::string value;
    std::string rule;  // truncate, divide-1000, negate, increment, ..., static-list, violate-maxlength
    std::string base;

    bool operator==(const MutationCandidate&) const = default;
};

struct MutateOptions {
    std::uint64_t seed = 0;
    bool violate_restrictions = false;
};

// Y<->N, 1<->0, T<->F, true<->false with the token's letter case kept.
// Anything else comes back unchanged.
std::string negate_boolean(std::string_view value);

// Longest number token (`\d[\d,]*(?:\.\d+)?`, with a leading sign at the start or after
// whitespace) of a value as [offset, length].
std::optional<std::pair<std::size_t, std::size_t>> numeric_portion(std::string_view value);

const std::array<std::string_view, 12>& static_tamper_list();

// The two multipliers/addends drawn for a parameter; fixed by (seed, name).
std::array<long long, 2> seeded_integers(std::uint64_t seed, std::string_view name);

// Ordered, de-duplicated candidates, none equal to `base`.
std::vector<MutationCandidate> mutate(const InputControl& control, std::string_view base, InputTypeHint hint,
                                      const MutateOptions& options);

// First candidate whose normalized value differs from `avoid`, trying the
// increment first. Throws ScanError when every candidate normalizes to `avoid`.
MutationCandidate next_differing(const InputControl& control, std::string_view base, std::string_view avoid,
                                 const MutateOptions& options);

}  // namespace tamperscan

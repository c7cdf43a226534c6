#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tamperscan/capture.hpp"
#include "tamperscan/fuzz.hpp"

namespace tamperscan {

inline constexpr int kReportSchemaVersion = 1;

struct ConfigEcho {
    std::uint64_t seed = 0;
    int budget = 8;
    int occurrence_limit = 3;
    long long delay_ms = 0;
    std::optional<std::string> accept_regex;
    bool violate_restrictions = false;

    bool operator==(const ConfigEcho&) const = default;
};

struct CaptureSummary {
    std::vector<TokenCandidate> token_candidates;
    TokenRegistry tokens;
    std::vector<DepCandidate> dependency_candidates;
    FeatureSet features;

    static CaptureSummary of(const CaptureResult& capture);
    bool operator==(const CaptureSummary&) const = default;
};

struct ScanReport {
    int schema_version = kReportSchemaVersion;
    std::string target;
    std::string scenario;
    ConfigEcho config;
    CaptureSummary capture;
    DependencyMap dependencies;
    std::vector<Finding> findings;
    std::vector<Inconclusive> inconclusives;
    std::vector<ParamOutcome> outcomes;
    ScanCounters counters;

    bool operator==(const ScanReport&) const = default;
};

// Expected outcome of one scenario: vulnerable iff `params` is non-empty.
struct GroundTruth {
    std::vector<std::string> params;

    bool vulnerable() const { return !params.empty(); }
};

struct Confusion {
    int tp = 0;
    int fp = 0;
    int tn = 0;
    int fn = 0;

    Confusion& operator+=(const Confusion& o);
    std::string line() const;
};

// Per-scenario tally: a true positive needs a finding on every expected parameter.
Confusion tally(const ScanReport& report, const GroundTruth& truth);

nlohmann::ordered_json to_json(const CaptureSummary& summary);
CaptureSummary capture_summary_from_json(const nlohmann::json& j);

std::string emit_json(const ScanReport& report);
// Throws ParseError on schema mismatch.
ScanReport parse_report(std::string_view json_text);
std::string emit_text(const ScanReport& report, const std::optional<GroundTruth>& truth = std::nullopt);

}  // namespace tamperscan

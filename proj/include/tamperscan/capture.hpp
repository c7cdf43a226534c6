#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tamperscan/action_script.hpp"
#include "tamperscan/features.hpp"
#include "tamperscan/session.hpp"

namespace tamperscan {

struct StepKey {
    int step = 0;
    std::string name;

    auto operator<=>(const StepKey&) const = default;
};

struct TokenCandidate {
    StepKey key;
    ParamSource source = ParamSource::HiddenField;
    bool session_scoped = false;  // recurs across steps within a run
    std::string run1_value;
    std::string run2_value;

    bool operator==(const TokenCandidate&) const = default;
};

// Confirmed server-generated tokens, exempt from mutation.
struct TokenRegistry {
    std::set<StepKey> one_time;
    std::set<StepKey> session;

    bool contains(const StepKey& key) const { return one_time.contains(key) || session.contains(key); }
    bool operator==(const TokenRegistry&) const = default;
};

// (step, name) whose value equals `prior_name`'s value in the preceding request.
struct DepCandidate {
    StepKey key;
    std::string prior_name;
    std::string value;
    std::string prior_value;

    bool operator==(const DepCandidate&) const = default;
};

struct CaptureConfig {
    int occurrence_limit = 3;
    std::optional<std::string> accept_regex;
};

struct CaptureResult {
    SubmissionTrace trace1;
    SubmissionTrace trace2;
    FeatureSet features;
    std::vector<TokenCandidate> token_candidates;
    TokenRegistry tokens;
    std::vector<DepCandidate> dependency_candidates;
};

// Two complete valid runs of the script. Throws CaptureError when either run fails.
std::pair<SubmissionTrace, SubmissionTrace> run_capture(const ActionScript& script, Session& session);

// Server-generated parameters whose values differ between the runs.
std::vector<TokenCandidate> detect_token_candidates(const SubmissionTrace& run1, const SubmissionTrace& run2);

// True when re-submitting a spent (or foreign-session) value makes the step lose its key features.
bool confirm_one_time(const ActionScript& script, Session& session, const FeatureSet& features,
                      const TokenCandidate& candidate);

std::vector<DepCandidate> detect_dependency_candidates(const SubmissionTrace& trace);

FeatureSet detect_valid_features(const ActionScript& script, const SubmissionTrace& run1,
                                 const SubmissionTrace& run2, const CaptureConfig& config);

// The whole capturing phase.
CaptureResult capture(const ActionScript& script, Session& session, const CaptureConfig& config = {});

}  // namespace tamperscan

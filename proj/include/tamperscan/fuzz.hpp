#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tamperscan/capture.hpp"
#include "tamperscan/mutate.hpp"

namespace tamperscan {

struct FuzzConfig {
    std::uint64_t seed = 0;
    int budget = 8;  // forced attempts per parameter
    bool violate_restrictions = false;
};

struct FuzzPlan {
    ActionScript script;
    CaptureResult capture;
    FuzzConfig config;
};

struct ConfirmedDependency {
    DepCandidate candidate;
    std::string probe_value;
    std::vector<std::string> missing;  // features the probe response lacked

    bool operator==(const ConfirmedDependency&) const = default;
};

struct DependencyMap {
    std::vector<ConfirmedDependency> confirmed;
    std::vector<DepCandidate> rejected;    // probe accepted: the server ignores the equality
    std::vector<DepCandidate> unresolved;  // probe could not be built or sent

    bool contains(const StepKey& key) const;
    bool operator==(const DependencyMap&) const = default;
};

struct Evidence {
    std::vector<std::string> features;
    std::string request_excerpt;
    std::string response_excerpt;

    bool operator==(const Evidence&) const = default;
};

struct Finding {
    int step = 0;
    std::string param;
    ParamSource source = ParamSource::UserInput;
    std::string base_value;
    std::string mutated_value;
    std::string rule;
    std::vector<Violation> violations;  // why the client refused the value
    Evidence evidence;
    std::string timestamp;

    bool operator==(const Finding&) const = default;
};

struct Inconclusive {
    int step = 0;
    std::string param;
    std::string mutated_value;
    std::string reason;

    bool operator==(const Inconclusive&) const = default;
};

struct ParamOutcome {
    int step = 0;
    std::string param;
    ParamSource source = ParamSource::UserInput;
    std::string status;  // fuzzed, exhausted, exempt-token, exempt-dependent, skipped-cookie
    int candidates_tried = 0;
    int forced_attempts = 0;
    int findings = 0;

    bool operator==(const ParamOutcome&) const = default;
};

struct ScanCounters {
    std::size_t requests_sent = 0;
    int forced_attempts = 0;
    int accepted = 0;
    int rejected = 0;
    int inconclusive = 0;
    std::map<std::string, int> rejections_by_cause;  // first missing feature kind

    bool operator==(const ScanCounters&) const = default;
};

struct ScanResult {
    DependencyMap dependencies;
    std::vector<Finding> findings;
    std::vector<Inconclusive> inconclusives;
    std::vector<ParamOutcome> outcomes;
    ScanCounters counters;
};

std::string excerpt(std::string_view text, std::size_t limit = 512);

DependencyMap confirm_dependencies(const FuzzPlan& plan, Session& session);

struct ClientRejected {
    MutationCandidate candidate;
    Verdict verdict;
};

// Walks `candidates` from `cursor`, placing each into the form and evaluating it
// client-side. Returns the first rejected one; accepted ones are dropped unsent.
// Names of controls that any evaluated value reveals are appended to `revealed`.
std::optional<ClientRejected> get_client_rejected(const Form& live_form, const FieldValues& values,
                                                  const std::string& param,
                                                  const std::vector<MutationCandidate>& candidates,
                                                  std::size_t& cursor, std::vector<std::string>* revealed = nullptr);

// Replays one forced attempt for (step, param), drawing candidates from `cursor`.
// Client-accepted candidates are skipped without sending. Revealed controls not yet
// queued are appended to `revealed`.
struct Attempt {
    std::optional<MutationCandidate> candidate;  // empty: candidates exhausted
    std::vector<Violation> violations;
    std::optional<TraceStep> step;
    Classification classification;
    std::optional<std::string> transport_error;
};

struct FuzzTarget {
    int step = 0;
    std::string param;
    ParamSource source = ParamSource::UserInput;
    FieldValues setup;  // values that make a revealed control appear
};

Attempt force_and_classify(const FuzzPlan& plan, Session& session, const FuzzTarget& target, std::size_t& cursor,
                           std::vector<std::string>* revealed = nullptr);

// The full fuzzing phase. Throws ScanError when a fresh valid replay no longer shows
// the captured features.
ScanResult scan(const FuzzPlan& plan, Session& session);

}  // namespace tamperscan

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamperscan/report.hpp"

namespace tamperscan {

enum class Scenario { HsbcLike, BeaLike, BocLike, AjaxDate };

std::string_view to_string(Scenario scenario);
// Throws ConfigError for an unknown name.
Scenario scenario_from_string(std::string_view name);
const std::vector<Scenario>& all_scenarios();

enum class RejectCause { TokenMissing, TokenSpent, DependencyMismatch, WorkflowOrder, ValidationFail };

std::string_view to_string(RejectCause cause);
RejectCause reject_cause_from_string(std::string_view text);

struct LogEntry {
    std::size_t seq = 0;
    std::string session;
    std::string route;
    bool accepted = false;
    std::optional<RejectCause> cause;
    std::string detail;
};

struct Transfer {
    std::string session;
    std::string from;
    std::string to;
    std::string amount;
    std::string txn;
};

struct TestbedConfig {
    Scenario scenario = Scenario::HsbcLike;
    std::string host = "127.0.0.1";
    int port = 0;  // 0: ephemeral
    std::uint64_t token_seed = 1;
};

// Parameters a correct scan must report for the scenario.
GroundTruth ground_truth(Scenario scenario);

// The bundled action script for a scenario.
std::string_view bundled_script(Scenario scenario);

class Testbed {
public:
    explicit Testbed(TestbedConfig config);
    ~Testbed();
    Testbed(const Testbed&) = delete;
    Testbed& operator=(const Testbed&) = delete;

    // Binds and serves on a background thread. Throws ConfigError on bind failure.
    void start();
    void stop();
    // Blocks until stop() is called from elsewhere.
    void wait();

    int port() const;
    std::string base_url() const;
    Scenario scenario() const;

    std::vector<LogEntry> log(std::size_t since = 0) const;
    std::size_t log_size() const;
    std::vector<Transfer> transfers() const;
    // Drops sessions, log and transfers and restarts the token sequence.
    void reset();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tamperscan

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "tamperscan/report.hpp"
#include "tamperscan/testbed.hpp"

namespace tamperscan {

struct ScanOptions {
    CaptureConfig capture;
    FuzzConfig fuzz;
    std::chrono::milliseconds delay{0};
};

ConfigEcho echo(const ScanOptions& options);

// Script base replaced by `base` when non-empty.
ActionScript with_base(ActionScript script, const std::string& base);

ScanReport make_report(const ActionScript& script, const CaptureResult& capture, const ScanResult& result,
                       const ScanOptions& options);

// Capture then fuzz in one session.
ScanReport run_scan(const ActionScript& script, const ScanOptions& options);

struct ScenarioRun {
    Scenario scenario = Scenario::HsbcLike;
    ScanReport report;
    Confusion confusion;
    std::vector<LogEntry> capture_log;  // test-bed log while capturing
    std::vector<LogEntry> fuzz_log;     // test-bed log while fuzzing
    double seconds = 0;
    std::optional<std::string> error;

    int rejections(RejectCause cause, bool fuzzing = true) const;
};

// Fresh test bed on an ephemeral port, bundled script, full scan.
ScenarioRun run_scenario(Scenario scenario, const ScanOptions& options);

struct SelftestResult {
    std::vector<ScenarioRun> runs;
    Confusion total;

    bool passed() const { return total.fp == 0 && total.fn == 0 && total.tp + total.tn == static_cast<int>(runs.size()); }
};

SelftestResult selftest(const ScanOptions& options, bool parallel = true);

std::string selftest_summary(const SelftestResult& result);

}  // namespace tamperscan

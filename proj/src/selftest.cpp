#include "tamperscan/selftest.hpp"

#include <algorithm>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

ConfigEcho echo(const ScanOptions& o) {
    return {o.fuzz.seed,  o.fuzz.budget, o.capture.occurrence_limit, static_cast<long long>(o.delay.count()),
            o.capture.accept_regex, o.fuzz.violate_restrictions};
}

ActionScript with_base(ActionScript script, const std::string& base) {
    if (!base.empty()) script.base_url = base;
    return script;
}

ScanReport make_report(const ActionScript& script, const CaptureResult& capture, const ScanResult& result,
                       const ScanOptions& options) {
    ScanReport r;
    r.target = script.base_url;
    r.scenario = script.scenario;
    r.config = echo(options);
    r.capture = CaptureSummary::of(capture);
    r.dependencies = result.dependencies;
    r.findings = result.findings;
    r.inconclusives = result.inconclusives;
    r.outcomes = result.outcomes;
    r.counters = result.counters;
    return r;
}

ScanReport run_scan(const ActionScript& script, const ScanOptions& options) {
    Session session(SessionOptions{options.delay});
    FuzzPlan plan{script, capture(script, session, options.capture), options.fuzz};
    auto result = scan(plan, session);
    return make_report(script, plan.capture, result, options);
}

int ScenarioRun::rejections(RejectCause cause, bool fuzzing) const {
    const auto& log = fuzzing ? fuzz_log : capture_log;
    return static_cast<int>(std::count_if(log.begin(), log.end(), [&](const LogEntry& e) { return e.cause == cause; }));
}

ScenarioRun run_scenario(Scenario scenario, const ScanOptions& options) {
    ScenarioRun run;
    run.scenario = scenario;
    auto started = std::chrono::steady_clock::now();
    try {
        Testbed bed(TestbedConfig{scenario});
        bed.start();
        auto script = with_base(ActionScript::parse(bundled_script(scenario)), bed.base_url());
        Session session(SessionOptions{options.delay});
        FuzzPlan plan{script, capture(script, session, options.capture), options.fuzz};
        run.capture_log = bed.log();
        auto result = scan(plan, session);
        run.fuzz_log = bed.log(run.capture_log.size());
        run.report = make_report(script, plan.capture, result, options);
        run.confusion = tally(run.report, ground_truth(scenario));
    } catch (const Error& e) {
        run.error = e.what();
        run.confusion = ground_truth(scenario).vulnerable() ? Confusion{0, 0, 0, 1} : Confusion{0, 1, 0, 0};
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return run;
}

SelftestResult selftest(const ScanOptions& options, bool parallel) {
    SelftestResult result;
    if (parallel) {
        std::vector<std::future<ScenarioRun>> jobs;
        for (auto s : all_scenarios()) jobs.push_back(std::async(std::launch::async, run_scenario, s, options));
        for (auto& j : jobs) result.runs.push_back(j.get());
    } else {
        for (auto s : all_scenarios()) result.runs.push_back(run_scenario(s, options));
    }
    for (const auto& r : result.runs) result.total += r.confusion;
    return result;
}

std::string selftest_summary(const SelftestResult& result) {
    std::ostringstream out;
    for (const auto& r : result.runs) {
        std::set<std::string> params;
        for (const auto& f : r.report.findings) params.insert(f.param);
        std::string found;
        for (const auto& p : params) found += (found.empty() ? "" : ",") + p;
        std::string expected;
        for (const auto& p : ground_truth(r.scenario).params) expected += (expected.empty() ? "" : ",") + p;

        out << std::left << std::setw(10) << to_string(r.scenario) << " ";
        if (r.error) {
            out << "ERROR " << *r.error << "\n";
            continue;
        }
        const char* verdict = r.confusion.tp ? "TP" : r.confusion.tn ? "TN" : r.confusion.fp ? "FP" : "FN";
        out << verdict << "  findings=" << r.report.findings.size() << " [" << found << "] expected [" << expected
            << "]  forced=" << r.report.counters.forced_attempts << " requests=" << r.report.counters.requests_sent
            << "  token-rejections=" << r.rejections(RejectCause::TokenSpent) + r.rejections(RejectCause::TokenMissing)
            << " workflow-rejections=" << r.rejections(RejectCause::WorkflowOrder) << "  " << std::fixed
            << std::setprecision(2) << r.seconds << "s\n";
    }
    out << result.total.line() << "\n";
    out << (result.passed() ? "selftest passed" : "selftest FAILED") << "\n";
    return out.str();
}

}  // namespace tamperscan

// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "synthetic_traces.hpp"
#include "tamperscan/capture.hpp"
#include "tamperscan/features.hpp"
#include "tamperscan/fuzz.hpp"
#include "tamperscan/selftest.hpp"
#include "tamperscan/testbed.hpp"

using namespace tamperscan;

namespace {

constexpr double kSelftestSeconds = 60.0;
constexpr int kOracleTraces = 200;
constexpr std::uint64_t kOracleSeed = 20140301;

const std::string kOriginalTo = "FUND RECEIPIENT~~290 123456882";
const std::string kOtherPayee = "UTILITY CO~~018 800200300";
const std::string kUnlistedTo = "FUND RECEIPIENT~~290 123456883";

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            detail << " [" << what << "]";
        }
    }
};

int failures = 0;

void report(int id, const std::string& name, Check& c, const std::string& summary) {
    std::printf("[%s] %d %s: %s%s\n", c.ok ? "PASS" : "FAIL", id, name.c_str(), summary.c_str(), c.detail.str().c_str());
    std::fflush(stdout);
    failures += !c.ok;
}

template <typename F>
void guarded(int id, const std::string& name, F body) {
    Check c;
    std::string summary;
    try {
        summary = body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    report(id, name, c, summary);
}

int count_cause(const std::vector<LogEntry>& log, RejectCause cause) {
    return static_cast<int>(std::count_if(log.begin(), log.end(), [&](const LogEntry& e) { return e.cause == cause; }));
}

bool findings_on(const ScanReport& r, const std::string& param) {
    return std::any_of(r.findings.begin(), r.findings.end(), [&](const Finding& f) { return f.param == param; });
}

const ScenarioRun& run_of(const SelftestResult& r, Scenario s) {
    return *std::find_if(r.runs.begin(), r.runs.end(), [&](const ScenarioRun& x) { return x.scenario == s; });
}

std::string findings_fingerprint(const SelftestResult& r) {
    std::ostringstream out;
    for (const auto& run : r.runs) {
        ScanReport findings_only;
        findings_only.findings = run.report.findings;
        for (auto& f : findings_only.findings) f.timestamp.clear();
        out << to_string(run.scenario) << "\n" << emit_json(findings_only) << "\n";
    }
    return out.str();
}

bool acknowledged(const SubmissionTrace& t) {
    return t.steps.size() == 2 && t.steps[1].response.body.find("Transfer completed") != std::string::npos;
}

struct HsbcBed {
    Testbed bed{TestbedConfig{Scenario::HsbcLike}};
    ActionScript script;

    HsbcBed() {
        bed.start();
        script = with_base(ActionScript::parse(bundled_script(Scenario::HsbcLike)), bed.base_url());
    }
};

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    ScanOptions options;
    options.fuzz.seed = 0;

    auto started = std::chrono::steady_clock::now();
    SelftestResult first = selftest(options);
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    guarded(1, "confusion matrix", [&](Check& c) {
        for (const auto& r : first.runs) c.expect(!r.error, std::string(to_string(r.scenario)) + " error");
        c.expect(findings_on(run_of(first, Scenario::HsbcLike).report, "TO"), "hsbc-like TO");
        c.expect(findings_on(run_of(first, Scenario::BeaLike).report, "TO"), "bea-like TO");
        c.expect(findings_on(run_of(first, Scenario::AjaxDate).report, "DATE"), "ajax-date DATE");
        c.expect(run_of(first, Scenario::BocLike).report.findings.empty(), "boc-like has findings");
        c.expect(first.passed(), "confusion");
        c.expect(seconds < kSelftestSeconds, "runtime");
        std::ostringstream s;
        s << first.total.line() << ", " << seconds << " s (limit " << kSelftestSeconds << " s)";
        return s.str();
    });

    guarded(2, "token preservation", [&](Check& c) {
        int n = 0, requests = 0;
        for (const auto& r : first.runs) {
            n += count_cause(r.fuzz_log, RejectCause::TokenSpent) + count_cause(r.fuzz_log, RejectCause::TokenMissing);
            requests += static_cast<int>(r.fuzz_log.size());
        }
        c.expect(n == 0, "token rejections during fuzzing");
        c.expect(requests > 0, "fuzzing sent nothing");
        return std::to_string(n) + " token-spent/token-missing entries over " + std::to_string(requests) +
               " fuzzing-phase submissions";
    });

    guarded(3, "workflow preservation", [&](Check& c) {
        int n = 0;
        for (const auto& r : first.runs) n += count_cause(r.fuzz_log, RejectCause::WorkflowOrder);
        c.expect(n == 0, "workflow-order rejections during fuzzing");
        return std::to_string(n) + " workflow-order entries";
    });

    guarded(4, "dependency handling", [&](Check& c) {
        std::ostringstream s;
        {
            HsbcBed h;
            Session session;
            FuzzPlan plan{h.script, capture(h.script, session, options.capture), options.fuzz};
            std::size_t mark = h.bed.log_size();
            auto deps = confirm_dependencies(plan, session);
            int mismatches = count_cause(h.bed.log(mark), RejectCause::DependencyMismatch);
            c.expect(deps.contains({2, "TO"}), "step-2 TO not confirmed dependent");
            c.expect(mismatches == 1, "probe mismatches != 1");
            s << "(a) step-2 TO dependent, probe logged " << mismatches << " dependency-mismatch; ";
        }

        HsbcBed h;
        Session session;
        auto pair = [&](std::map<int, FieldValues> overrides) {
            ReplayOptions o;
            o.overrides = std::move(overrides);
            o.force = {1, 2};
            return replay(h.script, session, o);
        };
        auto last_cause = [&] { return h.bed.log().back().cause; };

        auto oo1 = pair({});
        auto oo2 = pair({});
        c.expect(acknowledged(oo1) && acknowledged(oo2), "o/o rejected");
        c.expect(oo1.steps[0].values.at("CSRF1") != oo2.steps[0].values.at("CSRF1"), "o/o tokens not fresh");
        auto spent = session.send(oo2.steps[0].request);
        c.expect(spent.body.find("unable to process") != std::string::npos &&
                     last_cause() == RejectCause::TokenSpent,
                 "raw resend of a spent request accepted");

        auto om_to = pair({{2, {{"TO", kOtherPayee}}}});
        c.expect(!acknowledged(om_to) && last_cause() == RejectCause::DependencyMismatch, "o/m TO accepted");

        auto om_amt = pair({{2, {{"AMT", "9999"}}}});
        c.expect(acknowledged(om_amt), "o/m AMT rejected");
        c.expect(h.bed.transfers().back().amount == "1250", "o/m AMT honoured");

        auto mo = pair({{1, {{"TO", kOtherPayee}}}, {2, {{"TO", kOriginalTo}}}});
        c.expect(!acknowledged(mo) && last_cause() == RejectCause::DependencyMismatch, "m/o accepted");

        auto mm = pair({{1, {{"TO", kOtherPayee}}}});
        c.expect(acknowledged(mm) && h.bed.transfers().back().to == kOtherPayee, "consistent m/m rejected");

        auto mm_break = pair({{1, {{"TO", kOtherPayee}}}, {2, {{"TO", kUnlistedTo}}}});
        c.expect(!acknowledged(mm_break) && last_cause() == RejectCause::DependencyMismatch, "breaking m/m accepted");

        s << "(b) o/o accepted x2, o/m TO rejected, o/m AMT disregarded, m/o rejected, m/m consistent accepted, "
             "m/m breaking rejected, spent resend token-spent";
        return s.str();
    });

    guarded(5, "detector vectors", [&](Check& c) {
        struct Case {
            const char* text;
            bool accepts;
        };
        const Case cases[] = {
            {"Transaction completed", true},      {"Update did not complete", false},
            {"Updated successfully", true},       {"successfully", false},
            {"Success", true},                    {"Payment successful", true},
            {"Done", true},                       {"OK", true},
            {"Okay, executed", true},             {"Sorry, the update failed", false},
            {"Transfer couldn't be completed", false}, {"Error: done", false},
            {"Undone", false},                    {"completion pending", false},
        };
        int n = 0;
        for (const auto& k : cases) {
            c.expect(keyword_accepts(k.text) == k.accepts, k.text);
            ++n;
        }
        auto hits = find_reflections({{Locator::child_path({0}), "$12,345.00"}}, "12345", MatchMode::Numeric);
        c.expect(hits.count == 1, "12345 in $12,345.00");
        c.expect(normalize_value("1,234.50") == normalize_value("1234.5"), "1,234.50 == 1234.5");
        return std::to_string(n) + " keyword strings, numeric reflection, normalization";
    });

    guarded(6, "oracle equivalence", [&](Check& c) {
        std::mt19937_64 rng(kOracleSeed);
        int equal = 0, nonempty = 0;
        for (int i = 0; i < kOracleTraces; ++i) {
            auto trace = oracle::random_two_step_trace(rng);
            auto expected = oracle::brute_force_dependencies(trace);
            nonempty += !expected.empty();
            equal += oracle::as_tuples(detect_dependency_candidates(trace)) == expected;
        }
        c.expect(equal == kOracleTraces, "mismatching traces");
        return std::to_string(equal) + "/" + std::to_string(kOracleTraces) + " traces equal (" +
               std::to_string(nonempty) + " with candidates)";
    });

    guarded(7, "determinism", [&](Check& c) {
        SelftestResult second = selftest(options);
        auto a = findings_fingerprint(first), b = findings_fingerprint(second);
        c.expect(a == b, "finding sets differ");
        std::size_t n = 0;
        for (const auto& r : first.runs) n += r.report.findings.size();
        return std::to_string(n) + " findings byte-identical across two seed-0 runs";
    });

    guarded(8, "one-time token confirmation", [&](Check& c) {
        HsbcBed h;
        Session session;
        auto cap = capture(h.script, session, options.capture);
        c.expect(cap.tokens.one_time.contains({1, "CSRF1"}), "CSRF1 not confirmed");

        ReplayOptions once;
        once.stop_after = 1;
        auto consumed = replay(h.script, session, once);
        TraceStep resent = consumed.steps.at(0);
        resent.response = session.send(resent.request);
        resent.body = ParsedBody::parse(resent.response.body, resent.response.content_type);
        resent.next_page = resent.body;
        auto cls = classify_step(*cap.features.for_step(1), resent);
        std::string matched;
        for (const auto& m : cls.matched) matched += m + ";";
        c.expect(!cls.accepted && cls.matched.empty(), "resend shows features: " + matched);

        bool decoy_candidate = std::any_of(cap.token_candidates.begin(), cap.token_candidates.end(),
                                           [](const TokenCandidate& t) { return t.key == StepKey{1, "UITOKEN"}; });
        c.expect(decoy_candidate, "UITOKEN not a candidate");
        c.expect(!cap.tokens.contains({1, "UITOKEN"}), "UITOKEN confirmed");
        const auto& outcomes = run_of(first, Scenario::HsbcLike).report.outcomes;
        auto it = std::find_if(outcomes.begin(), outcomes.end(),
                               [](const ParamOutcome& o) { return o.step == 1 && o.param == "UITOKEN"; });
        c.expect(it != outcomes.end() && it->candidates_tried > 0 && !it->status.starts_with("exempt"),
                 "UITOKEN not fuzzed");
        return "CSRF1 resend feature-free (" + std::to_string(cls.missing.size()) +
               " features missing), UITOKEN unconfirmed and fuzzed (" +
               std::to_string(it == outcomes.end() ? 0 : it->candidates_tried) + " candidates)";
    });

    std::printf("%d of 8 criteria failed\n", failures);
    return failures;
}

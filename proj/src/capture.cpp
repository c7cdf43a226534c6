#include "tamperscan/capture.hpp"

#include <algorithm>
#include <charconv>
#include <regex>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

namespace {

bool server_generated(ParamSource s) { return s == ParamSource::HiddenField || s == ParamSource::QueryString; }

const Param* find_param(const TraceStep& step, const std::string& name, ParamSource source) {
    for (const auto& p : step.params) {
        if (p.name == name && p.source == source) return &p;
    }
    return nullptr;
}

SubmissionTrace capture_run(const ActionScript& script, Session& session, int run) {
    SubmissionTrace trace;
    try {
        trace = replay(script, session);
    } catch (const ReplayError& e) {
        throw CaptureError("valid run " + std::to_string(run) + " was not accepted at step " + std::to_string(e.step()) +
                           " (" + e.what() + " " + e.locator() + ")" +
                           (run == 2 ? "; the server may reject duplicate submissions, vary the script's inputs" : ""));
    }
    if (trace.halted_step) {
        throw CaptureError("valid run " + std::to_string(run) + " fails client-side validation at step " +
                           std::to_string(*trace.halted_step) + "; fix the script values");
    }
    if (!trace.complete(script)) throw CaptureError("valid run " + std::to_string(run) + " is incomplete");
    return trace;
}

std::string normalized_key(const NormalizedValue& v) {
    if (!v.numeric) return "s:" + v.text;
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v.number);
    return "n:" + std::string(buf, ptr);
}

}  // namespace

std::pair<SubmissionTrace, SubmissionTrace> run_capture(const ActionScript& script, Session& session) {
    auto first = capture_run(script, session, 1);
    auto second = capture_run(script, session, 2);
    return {std::move(first), std::move(second)};
}

std::vector<TokenCandidate> detect_token_candidates(const SubmissionTrace& run1, const SubmissionTrace& run2) {
    if (run1.steps.size() != run2.steps.size()) {
        throw CaptureError("capture runs have different step counts (" + std::to_string(run1.steps.size()) + " vs " +
                           std::to_string(run2.steps.size()) + ")");
    }
    std::vector<TokenCandidate> out;
    for (std::size_t k = 0; k < run1.steps.size(); ++k) {
        for (const auto& p1 : run1.steps[k].params) {
            if (!server_generated(p1.source)) continue;
            const Param* p2 = find_param(run2.steps[k], p1.name, p1.source);
            if (!p2 || p2->value == p1.value) continue;
            TokenCandidate c;
            c.key = {static_cast<int>(k + 1), p1.name};
            c.source = p1.source;
            c.run1_value = p1.value;
            c.run2_value = p2->value;
            for (std::size_t j = 0; j < run1.steps.size() && !c.session_scoped; ++j) {
                if (j == k) continue;
                c.session_scoped = std::any_of(run1.steps[j].params.begin(), run1.steps[j].params.end(), [&](const Param& q) {
                    return server_generated(q.source) && q.value == p1.value;
                });
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

bool confirm_one_time(const ActionScript& script, Session& session, const FeatureSet& features,
                      const TokenCandidate& candidate) {
    const int k = candidate.key.step;
    const auto* step_features = features.for_step(k);
    if (!step_features) return false;

    std::string stale;
    bool keep_session = false;
    if (candidate.session_scoped) {
        // A session value is not spent by use; the other run's session supplies a foreign one.
        stale = candidate.run2_value;
    } else {
        ReplayOptions consume;
        consume.stop_after = k;
        auto consumed = replay(script, session, consume);
        if (static_cast<int>(consumed.steps.size()) < k) return false;
        const auto& step = consumed.steps[static_cast<std::size_t>(k - 1)];
        const Param* spent = find_param(step, candidate.key.name, candidate.source);
        if (!spent) return false;
        stale = spent->value;
        keep_session = true;
    }

    ReplayOptions probe;
    probe.overrides[k][candidate.key.name] = stale;
    probe.force.insert(k);
    probe.stop_after = k;
    probe.keep_session = keep_session;
    auto trace = replay(script, session, probe);
    if (static_cast<int>(trace.steps.size()) < k) return false;
    auto verdict = classify_step(*step_features, trace.steps[static_cast<std::size_t>(k - 1)]);
    spdlog::info("token candidate step {} '{}': {}", k, candidate.key.name,
                 verdict.accepted ? "resend accepted, not a token" : "resend rejected, confirmed");
    return !verdict.accepted;
}

std::vector<DepCandidate> detect_dependency_candidates(const SubmissionTrace& trace) {
    std::vector<DepCandidate> out;
    for (std::size_t k = 1; k < trace.steps.size(); ++k) {
        std::unordered_map<std::string, const Param*> prior;
        for (const auto& q : trace.steps[k - 1].params) {
            if (q.source == ParamSource::Cookie) continue;
            auto norm = normalize_value(q.value);
            if (norm.numeric && norm.number != norm.number) continue;  // NaN never matches
            prior.emplace(normalized_key(norm), &q);
        }
        for (const auto& p : trace.steps[k].params) {
            if (p.source == ParamSource::Cookie) continue;
            auto it = prior.find(normalized_key(normalize_value(p.value)));
            if (it == prior.end()) continue;
            bool seen = std::any_of(out.begin(), out.end(), [&](const DepCandidate& d) {
                return d.key.step == static_cast<int>(k + 1) && d.key.name == p.name;
            });
            if (seen) continue;
            out.push_back({{static_cast<int>(k + 1), p.name}, it->second->name, p.value, it->second->value});
        }
    }
    return out;
}

FeatureSet detect_valid_features(const ActionScript& script, const SubmissionTrace& run1,
                                 const SubmissionTrace& run2, const CaptureConfig& config) {
    if (config.occurrence_limit < 1) throw ConfigError("occurrence limit must be at least 1");
    if (run1.steps.size() != run2.steps.size()) throw CaptureError("capture runs are not step-aligned");

    FeatureSet set;
    for (std::size_t i = 0; i < run1.steps.size(); ++i) {
        const auto& s1 = run1.steps[i];
        const auto& s2 = run2.steps[i];
        StepFeatures f;
        f.step = s1.index;

        if (auto next = script.click_of(f.step + 1)) {
            if (button_present(s1.next_page, *next) && button_present(s2.next_page, *next)) f.next_button = next;
        }

        auto leaves1 = s1.body.leaves();
        auto leaves2 = s2.body.leaves();
        for (const auto& p : s1.params) {
            if (p.source != ParamSource::UserInput) continue;
            std::string trimmed = p.value;
            trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
            trimmed.erase(trimmed.find_last_not_of(" \t\r\n") + 1);
            if (trimmed.size() < 2) continue;  // "1" or "0" shows up everywhere

            MatchMode mode = match_mode_for(p.value);
            auto hits1 = find_reflections(leaves1, p.value, mode);
            if (hits1.count < 1 || hits1.count > config.occurrence_limit) continue;
            const Param* p2 = find_param(s2, p.name, p.source);
            if (!p2) continue;
            auto hits2 = find_reflections(leaves2, p2->value, match_mode_for(p2->value));
            if (hits2.count < 1 || hits2.count > config.occurrence_limit) continue;
            f.reflections.push_back({p.name, mode, hits1.count, hits1.where});
        }

        if (f.reflections.empty()) {
            auto accepts = [](const std::vector<LeafText>& leaves) {
                return std::any_of(leaves.begin(), leaves.end(), [](const LeafText& l) { return keyword_accepts(l.text); });
            };
            f.keyword = accepts(leaves1) && accepts(leaves2);
            if (!f.keyword && s1.response.body.empty() && s2.response.body.empty()) {
                auto ok = [](int status) { return status >= 200 && status < 300; };
                f.status_only = ok(s1.response.status) && ok(s2.response.status);
            }
        }

        if (f.empty()) {
            if (!config.accept_regex) {
                throw CaptureError("no reproducible key feature found for step " + std::to_string(f.step) +
                                   "; supply --accept-regex");
            }
            std::regex re(*config.accept_regex, std::regex::ECMAScript);
            if (!std::regex_search(s1.response.body, re) || !std::regex_search(s2.response.body, re)) {
                throw CaptureError("--accept-regex does not match both valid responses of step " + std::to_string(f.step));
            }
            f.accept_regex = config.accept_regex;
        }
        set.steps.push_back(std::move(f));
    }
    return set;
}

CaptureResult capture(const ActionScript& script, Session& session, const CaptureConfig& config) {
    CaptureResult result;
    std::tie(result.trace1, result.trace2) = run_capture(script, session);
    result.features = detect_valid_features(script, result.trace1, result.trace2, config);
    result.token_candidates = detect_token_candidates(result.trace1, result.trace2);
    for (const auto& candidate : result.token_candidates) {
        if (!confirm_one_time(script, session, result.features, candidate)) continue;
        (candidate.session_scoped ? result.tokens.session : result.tokens.one_time).insert(candidate.key);
    }
    for (auto& d : detect_dependency_candidates(result.trace1)) {
        if (!result.tokens.contains(d.key)) result.dependency_candidates.push_back(std::move(d));
    }
    return result;
}

}  // namespace tamperscan

#include "tamperscan/fuzz.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

namespace {

std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string request_text(const HttpRequest& r) {
    std::string out = std::string(to_string(r.method)) + " " + Url::parse(r.target()).path_and_query();
    std::string body = r.body();
    if (!body.empty()) out += "\n\n" + body;
    return out;
}

std::string cause_of(const Classification& c) {
    if (c.missing.empty()) return "none";
    const auto& first = c.missing.front();
    return first.substr(0, first.find(':'));
}

// The control a parameter maps to, revealed ones included; query-string and
// unknown names get a bare text control.
InputControl control_for(const Form& live_form, const FieldValues& values, const std::string& name) {
    if (const auto* c = live_form.control(name)) return *c;
    Form revealed = apply_reveal(live_form, values);
    if (const auto* c = revealed.control(name)) return *c;
    InputControl bare;
    bare.name = name;
    return bare;
}

FieldValues reveal_setup(const Form& form, const std::string& name) {
    if (!form.clv) return {};
    for (const auto& rule : form.clv->reveal) {
        for (const auto& c : rule.add) {
            if (c.name == name) return {{rule.when_field, rule.when_equals}};
        }
    }
    return {};
}

}  // namespace

std::string excerpt(std::string_view text, std::size_t limit) {
    if (text.size() <= limit) return std::string(text);
    // Do not split a UTF-8 sequence.
    std::size_t cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

bool DependencyMap::contains(const StepKey& key) const {
    return std::any_of(confirmed.begin(), confirmed.end(), [&](const ConfirmedDependency& d) { return d.candidate.key == key; });
}

DependencyMap confirm_dependencies(const FuzzPlan& plan, Session& session) {
    DependencyMap map;
    const MutateOptions mopts{plan.config.seed, plan.config.violate_restrictions};
    const auto& trace = plan.capture.trace1;

    for (const auto& cand : plan.capture.dependency_candidates) {
        const int k = cand.key.step;
        const auto* features = plan.capture.features.for_step(k);
        if (!features || k < 1 || k > static_cast<int>(trace.steps.size())) {
            map.unresolved.push_back(cand);
            continue;
        }
        const auto& captured = trace.steps[static_cast<std::size_t>(k - 1)];
        InputControl control = control_for(captured.form, captured.values, cand.key.name);

        std::string probe;
        try {
            probe = next_differing(control, cand.value, cand.prior_value, mopts).value;
        } catch (const ScanError& e) {
            spdlog::warn("dependency candidate step {} '{}' left unconfirmed: {}", k, cand.key.name, e.what());
            map.unresolved.push_back(cand);
            continue;
        }

        ReplayOptions options;
        options.overrides[k][cand.key.name] = probe;
        options.force.insert(k);
        options.stop_after = k;
        SubmissionTrace result;
        try {
            result = replay(plan.script, session, options);
        } catch (const Error& e) {
            spdlog::warn("dependency probe step {} '{}' failed: {}", k, cand.key.name, e.what());
            map.unresolved.push_back(cand);
            continue;
        }
        if (static_cast<int>(result.steps.size()) < k) {
            map.unresolved.push_back(cand);
            continue;
        }
        auto verdict = classify_step(*features, result.steps[static_cast<std::size_t>(k - 1)]);
        spdlog::info("dependency candidate step {} '{}' ~ '{}': probe '{}' {}", k, cand.key.name, cand.prior_name,
                     probe, verdict.accepted ? "accepted" : "rejected, confirmed");
        if (verdict.accepted) {
            map.rejected.push_back(cand);
        } else {
            map.confirmed.push_back({cand, probe, verdict.missing});
        }
    }
    return map;
}

std::optional<ClientRejected> get_client_rejected(const Form& live_form, const FieldValues& values,
                                                  const std::string& param,
                                                  const std::vector<MutationCandidate>& candidates,
                                                  std::size_t& cursor, std::vector<std::string>* revealed) {
    while (cursor < candidates.size()) {
        const auto& candidate = candidates[cursor++];
        FieldValues trial = values;
        trial[param] = candidate.value;
        Prepared prepared = prepare_submission(live_form, trial);
        if (revealed) {
            for (const auto& name : prepared.revealed) {
                if (std::find(revealed->begin(), revealed->end(), name) == revealed->end()) revealed->push_back(name);
            }
        }
        if (!prepared.verdict.accepted()) return ClientRejected{candidate, prepared.verdict};
    }
    return std::nullopt;
}

Attempt force_and_classify(const FuzzPlan& plan, Session& session, const FuzzTarget& target, std::size_t& cursor,
                           std::vector<std::string>* revealed) {
    Attempt attempt;
    const MutateOptions mopts{plan.config.seed, plan.config.violate_restrictions};
    const bool in_query = target.source == ParamSource::QueryString;

    ReplayOptions options;
    options.stop_after = target.step;
    options.before_submit = [&](StepContext& ctx) {
        if (ctx.step != target.step) return;
        for (const auto& [name, value] : target.setup) ctx.values[name] = value;
        FieldValues& bag = in_query ? ctx.query_values : ctx.values;
        std::string base = bag.contains(target.param) ? bag[target.param] : std::string();
        InputControl control = control_for(ctx.live_form, ctx.values, target.param);
        auto candidates = mutate(control, base, infer_type(control, base).hint, mopts);

        std::optional<ClientRejected> hit;
        if (in_query) {
            // Query-string values pass no client-side check; nothing is ever refused.
            cursor = candidates.size();
        } else {
            hit = get_client_rejected(ctx.live_form, ctx.values, target.param, candidates, cursor, revealed);
        }
        if (!hit) {
            ctx.abort = true;
            return;
        }
        bag[target.param] = hit->candidate.value;
        ctx.force = true;
        attempt.candidate = hit->candidate;
        attempt.violations = hit->verdict.violations;
    };

    SubmissionTrace trace;
    try {
        trace = replay(plan.script, session, options);
    } catch (const TransportError& e) {
        attempt.transport_error = e.what();
        return attempt;
    } catch (const ReplayError& e) {
        attempt.transport_error = std::string(e.what()) + " " + e.locator();
        return attempt;
    }
    if (!attempt.candidate) return attempt;
    if (static_cast<int>(trace.steps.size()) < target.step) {
        attempt.transport_error = "replay stopped before step " + std::to_string(target.step);
        return attempt;
    }
    const auto* features = plan.capture.features.for_step(target.step);
    attempt.step = trace.steps[static_cast<std::size_t>(target.step - 1)];
    if (features) attempt.classification = classify_step(*features, *attempt.step);
    return attempt;
}

ScanResult scan(const FuzzPlan& plan, Session& session) {
    ScanResult result;
    const std::size_t requests_before = session.requests_sent();

    {
        SubmissionTrace fresh;
        try {
            fresh = replay(plan.script, session);
        } catch (const ReplayError& e) {
            throw ScanError(std::string("capture is stale (") + e.what() + " " + e.locator() + "); re-run capture");
        }
        if (!fresh.complete(plan.script)) throw ScanError("capture is stale: a valid replay no longer completes; re-run capture");
        for (const auto& step : fresh.steps) {
            const auto* f = plan.capture.features.for_step(step.index);
            if (f && !classify_step(*f, step).accepted) {
                throw ScanError("capture is stale: step " + std::to_string(step.index) +
                                " features are missing in a valid replay; re-run capture");
            }
        }
    }

    result.dependencies = confirm_dependencies(plan, session);

    std::vector<FuzzTarget> queue;
    for (const auto& step : plan.capture.trace1.steps) {
        for (const auto& p : step.params) {
            if (p.source == ParamSource::Cookie) continue;
            StepKey key{step.index, p.name};
            bool queued = std::any_of(queue.begin(), queue.end(),
                                      [&](const FuzzTarget& t) { return t.step == key.step && t.param == key.name; });
            bool reported = std::any_of(result.outcomes.begin(), result.outcomes.end(),
                                        [&](const ParamOutcome& o) { return o.step == key.step && o.param == key.name; });
            if (queued || reported) continue;
            if (plan.capture.tokens.contains(key)) {
                result.outcomes.push_back({step.index, p.name, p.source, "exempt-token", 0, 0, 0});
            } else if (result.dependencies.contains(key)) {
                result.outcomes.push_back({step.index, p.name, p.source, "exempt-dependent", 0, 0, 0});
            } else {
                queue.push_back({step.index, p.name, p.source, {}});
            }
        }
    }

    std::set<std::tuple<int, std::string, std::string>> seen_findings;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const FuzzTarget target = queue[qi];
        ParamOutcome outcome{target.step, target.param, target.source, "exhausted", 0, 0, 0};
        std::size_t cursor = 0;
        std::vector<std::string> revealed;

        while (outcome.forced_attempts < plan.config.budget) {
            const std::size_t start = cursor;
            Attempt attempt = force_and_classify(plan, session, target, cursor, &revealed);
            if (attempt.transport_error && attempt.candidate) {
                spdlog::warn("step {} '{}': {}; retrying once", target.step, target.param, *attempt.transport_error);
                cursor = start;
                attempt = force_and_classify(plan, session, target, cursor, &revealed);
            }
            outcome.candidates_tried = static_cast<int>(cursor);
            if (!attempt.candidate) {
                if (attempt.transport_error) {
                    result.inconclusives.push_back({target.step, target.param, "", *attempt.transport_error});
                }
                break;
            }
            ++outcome.forced_attempts;
            ++result.counters.forced_attempts;
            if (attempt.transport_error || !attempt.step) {
                ++result.counters.inconclusive;
                result.inconclusives.push_back({target.step, target.param, attempt.candidate->value,
                                                attempt.transport_error.value_or("no response")});
                continue;
            }
            if (!attempt.classification.accepted) {
                ++result.counters.rejected;
                ++result.counters.rejections_by_cause[cause_of(attempt.classification)];
                continue;
            }
            ++result.counters.accepted;
            auto key = std::make_tuple(target.step, target.param, attempt.candidate->rule);
            if (!seen_findings.insert(key).second) continue;
            Finding f;
            f.step = target.step;
            f.param = target.param;
            f.source = target.source;
            f.base_value = attempt.candidate->base;
            f.mutated_value = attempt.candidate->value;
            f.rule = attempt.candidate->rule;
            f.violations = attempt.violations;
            f.evidence.features = attempt.classification.matched;
            f.evidence.request_excerpt = excerpt(request_text(attempt.step->request));
            f.evidence.response_excerpt = excerpt(attempt.step->response.body);
            f.timestamp = utc_now();
            spdlog::info("finding: step {} '{}' = '{}' ({}) accepted by the server", f.step, f.param, f.mutated_value, f.rule);
            result.findings.push_back(std::move(f));
            ++outcome.findings;
        }
        if (outcome.forced_attempts > 0) outcome.status = "fuzzed";
        result.outcomes.push_back(outcome);

        const auto& captured = plan.capture.trace1.steps[static_cast<std::size_t>(target.step - 1)];
        for (const auto& name : revealed) {
            bool known = std::any_of(queue.begin(), queue.end(),
                                     [&](const FuzzTarget& t) { return t.step == target.step && t.param == name; });
            if (known) continue;
            spdlog::info("step {}: '{}' appeared while fuzzing '{}', queued", target.step, name, target.param);
            queue.push_back({target.step, name, ParamSource::UserInput, reveal_setup(captured.form, name)});
        }
    }

    result.counters.requests_sent = session.requests_sent() - requests_before;
    return result;
}

}  // namespace tamperscan

#include "tamperscan/report.hpp"

#include <algorithm>
#include <sstream>

#include "tamperscan/errors.hpp"

namespace tamperscan {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

StepKey key_from(const json& j) { return {j.at("step").get<int>(), j.at("name").get<std::string>()}; }

template <class T>
std::optional<T> opt_from(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

template <class T>
ojson opt_json(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

ojson locators_json(const std::vector<Locator>& where) {
    ojson out = ojson::array();
    for (const auto& l : where) out.push_back(l.to_string());
    return out;
}

std::vector<Locator> locators_from(const json& j) {
    std::vector<Locator> out;
    for (const auto& l : j) out.push_back(Locator::parse(l.get<std::string>()));
    return out;
}

ojson features_json(const FeatureSet& set) {
    ojson steps = ojson::array();
    for (const auto& s : set.steps) {
        ojson refl = ojson::array();
        for (const auto& r : s.reflections) {
            refl.push_back({{"param", r.param},
                            {"mode", std::string(to_string(r.mode))},
                            {"occurrences", r.occurrences},
                            {"where", locators_json(r.where)}});
        }
        steps.push_back({{"step", s.step},
                         {"next_button", s.next_button ? ojson(s.next_button->to_string()) : ojson(nullptr)},
                         {"reflections", refl},
                         {"keyword", s.keyword},
                         {"accept_regex", opt_json(s.accept_regex)},
                         {"status_only", s.status_only}});
    }
    return steps;
}

FeatureSet features_from(const json& j) {
    FeatureSet set;
    for (const auto& s : j) {
        StepFeatures f;
        f.step = s.at("step").get<int>();
        if (auto b = opt_from<std::string>(s, "next_button")) f.next_button = Locator::parse(*b);
        for (const auto& r : s.at("reflections")) {
            f.reflections.push_back({r.at("param").get<std::string>(),
                                     match_mode_from_string(r.at("mode").get<std::string>()),
                                     r.at("occurrences").get<int>(), locators_from(r.at("where"))});
        }
        f.keyword = s.at("keyword").get<bool>();
        f.accept_regex = opt_from<std::string>(s, "accept_regex");
        f.status_only = s.at("status_only").get<bool>();
        set.steps.push_back(std::move(f));
    }
    return set;
}

ojson dep_json(const DepCandidate& d) {
    return {{"step", d.key.step}, {"name", d.key.name}, {"prior_name", d.prior_name}, {"value", d.value},
            {"prior_value", d.prior_value}};
}

DepCandidate dep_from(const json& j) {
    return {key_from(j), j.at("prior_name").get<std::string>(), j.at("value").get<std::string>(),
            j.at("prior_value").get<std::string>()};
}

ojson violations_json(const std::vector<Violation>& vs) {
    ojson out = ojson::array();
    for (const auto& v : vs) out.push_back({{"field", v.field}, {"constraint", v.constraint}});
    return out;
}

std::vector<Violation> violations_from(const json& j) {
    std::vector<Violation> out;
    for (const auto& v : j) out.push_back({v.at("field").get<std::string>(), v.at("constraint").get<std::string>()});
    return out;
}

template <class T, class F>
ojson array_of(const std::vector<T>& items, F f) {
    ojson out = ojson::array();
    for (const auto& item : items) out.push_back(f(item));
    return out;
}

template <class T, class F>
std::vector<T> vector_from(const json& j, F f) {
    std::vector<T> out;
    for (const auto& item : j) out.push_back(f(item));
    return out;
}

ojson finding_json(const Finding& f) {
    return {{"step", f.step},
            {"param", f.param},
            {"source", std::string(to_string(f.source))},
            {"base_value", f.base_value},
            {"mutated_value", f.mutated_value},
            {"rule", f.rule},
            {"client_violations", violations_json(f.violations)},
            {"evidence",
             {{"features", f.evidence.features},
              {"request", f.evidence.request_excerpt},
              {"response", f.evidence.response_excerpt}}},
            {"timestamp", f.timestamp}};
}

Finding finding_from(const json& j) {
    Finding f;
    f.step = j.at("step").get<int>();
    f.param = j.at("param").get<std::string>();
    f.source = param_source_from_string(j.at("source").get<std::string>());
    f.base_value = j.at("base_value").get<std::string>();
    f.mutated_value = j.at("mutated_value").get<std::string>();
    f.rule = j.at("rule").get<std::string>();
    f.violations = violations_from(j.at("client_violations"));
    const auto& e = j.at("evidence");
    f.evidence.features = e.at("features").get<std::vector<std::string>>();
    f.evidence.request_excerpt = e.at("request").get<std::string>();
    f.evidence.response_excerpt = e.at("response").get<std::string>();
    f.timestamp = j.at("timestamp").get<std::string>();
    return f;
}

}  // namespace

CaptureSummary CaptureSummary::of(const CaptureResult& capture) {
    return {capture.token_candidates, capture.tokens, capture.dependency_candidates, capture.features};
}

ojson to_json(const CaptureSummary& s) {
    ojson tokens = ojson::array();
    for (const auto& t : s.token_candidates) {
        std::string status = s.tokens.one_time.contains(t.key)  ? "one-time"
                             : s.tokens.session.contains(t.key) ? "session"
                                                                : "unconfirmed";
        tokens.push_back({{"step", t.key.step},
                          {"name", t.key.name},
                          {"source", std::string(to_string(t.source))},
                          {"session_scoped", t.session_scoped},
                          {"run1_value", t.run1_value},
                          {"run2_value", t.run2_value},
                          {"status", status}});
    }
    return {{"token_candidates", tokens},
            {"dependency_candidates", array_of(s.dependency_candidates, dep_json)},
            {"features", features_json(s.features)}};
}

CaptureSummary capture_summary_from_json(const json& j) {
    CaptureSummary s;
    for (const auto& t : j.at("token_candidates")) {
        TokenCandidate c{key_from(t), param_source_from_string(t.at("source").get<std::string>()),
                         t.at("session_scoped").get<bool>(), t.at("run1_value").get<std::string>(),
                         t.at("run2_value").get<std::string>()};
        auto status = t.at("status").get<std::string>();
        if (status == "one-time") s.tokens.one_time.insert(c.key);
        else if (status == "session") s.tokens.session.insert(c.key);
        s.token_candidates.push_back(std::move(c));
    }
    s.dependency_candidates = vector_from<DepCandidate>(j.at("dependency_candidates"), dep_from);
    s.features = features_from(j.at("features"));
    return s;
}

std::string emit_json(const ScanReport& r) {
    ojson deps{{"confirmed", array_of(r.dependencies.confirmed,
                                      [](const ConfirmedDependency& d) {
                                          ojson o = dep_json(d.candidate);
                                          o["probe_value"] = d.probe_value;
                                          o["probe_missing"] = d.missing;
                                          return o;
                                      })},
               {"not_enforced", array_of(r.dependencies.rejected, dep_json)},
               {"unresolved", array_of(r.dependencies.unresolved, dep_json)}};

    ojson counters{{"requests_sent", r.counters.requests_sent},
                   {"forced_attempts", r.counters.forced_attempts},
                   {"accepted", r.counters.accepted},
                   {"rejected", r.counters.rejected},
                   {"inconclusive", r.counters.inconclusive},
                   {"rejections_by_cause", r.counters.rejections_by_cause}};

    ojson doc{{"schema_version", r.schema_version},
              {"target", r.target},
              {"scenario", r.scenario},
              {"config",
               {{"seed", r.config.seed},
                {"budget", r.config.budget},
                {"occurrence_limit", r.config.occurrence_limit},
                {"delay_ms", r.config.delay_ms},
                {"accept_regex", opt_json(r.config.accept_regex)},
                {"violate_restrictions", r.config.violate_restrictions}}},
              {"capture", to_json(r.capture)},
              {"dependencies", deps},
              {"findings", array_of(r.findings, finding_json)},
              {"inconclusive", array_of(r.inconclusives,
                                        [](const Inconclusive& i) {
                                            return ojson{{"step", i.step},
                                                         {"param", i.param},
                                                         {"mutated_value", i.mutated_value},
                                                         {"reason", i.reason}};
                                        })},
              {"params", array_of(r.outcomes,
                                  [](const ParamOutcome& o) {
                                      return ojson{{"step", o.step},
                                                   {"param", o.param},
                                                   {"source", std::string(to_string(o.source))},
                                                   {"status", o.status},
                                                   {"candidates_tried", o.candidates_tried},
                                                   {"forced_attempts", o.forced_attempts},
                                                   {"findings", o.findings}};
                                  })},
              {"counters", counters}};
    return doc.dump(2) + "\n";
}

ScanReport parse_report(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        ScanReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion) {
            throw ParseError("unsupported report schema version " + std::to_string(r.schema_version));
        }
        r.target = j.at("target").get<std::string>();
        r.scenario = j.at("scenario").get<std::string>();
        const auto& c = j.at("config");
        r.config.seed = c.at("seed").get<std::uint64_t>();
        r.config.budget = c.at("budget").get<int>();
        r.config.occurrence_limit = c.at("occurrence_limit").get<int>();
        r.config.delay_ms = c.at("delay_ms").get<long long>();
        r.config.accept_regex = opt_from<std::string>(c, "accept_regex");
        r.config.violate_restrictions = c.at("violate_restrictions").get<bool>();
        r.capture = capture_summary_from_json(j.at("capture"));

        const auto& d = j.at("dependencies");
        for (const auto& x : d.at("confirmed")) {
            r.dependencies.confirmed.push_back(
                {dep_from(x), x.at("probe_value").get<std::string>(), x.at("probe_missing").get<std::vector<std::string>>()});
        }
        r.dependencies.rejected = vector_from<DepCandidate>(d.at("not_enforced"), dep_from);
        r.dependencies.unresolved = vector_from<DepCandidate>(d.at("unresolved"), dep_from);

        r.findings = vector_from<Finding>(j.at("findings"), finding_from);
        r.inconclusives = vector_from<Inconclusive>(j.at("inconclusive"), [](const json& x) {
            return Inconclusive{x.at("step").get<int>(), x.at("param").get<std::string>(),
                                x.at("mutated_value").get<std::string>(), x.at("reason").get<std::string>()};
        });
        r.outcomes = vector_from<ParamOutcome>(j.at("params"), [](const json& x) {
            return ParamOutcome{x.at("step").get<int>(),
                                x.at("param").get<std::string>(),
                                param_source_from_string(x.at("source").get<std::string>()),
                                x.at("status").get<std::string>(),
                                x.at("candidates_tried").get<int>(),
                                x.at("forced_attempts").get<int>(),
                                x.at("findings").get<int>()};
        });
        const auto& k = j.at("counters");
        r.counters.requests_sent = k.at("requests_sent").get<std::size_t>();
        r.counters.forced_attempts = k.at("forced_attempts").get<int>();
        r.counters.accepted = k.at("accepted").get<int>();
        r.counters.rejected = k.at("rejected").get<int>();
        r.counters.inconclusive = k.at("inconclusive").get<int>();
        r.counters.rejections_by_cause = k.at("rejections_by_cause").get<std::map<std::string, int>>();
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("report does not match the schema: ") + e.what());
    }
}

Confusion& Confusion::operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

std::string Confusion::line() const {
    return "confusion: TP=" + std::to_string(tp) + " FP=" + std::to_string(fp) + " TN=" + std::to_string(tn) +
           " FN=" + std::to_string(fn);
}

Confusion tally(const ScanReport& report, const GroundTruth& truth) {
    Confusion c;
    if (!truth.vulnerable()) {
        (report.findings.empty() ? c.tn : c.fp) = 1;
        return c;
    }
    bool all = std::all_of(truth.params.begin(), truth.params.end(), [&](const std::string& p) {
        return std::any_of(report.findings.begin(), report.findings.end(), [&](const Finding& f) { return f.param == p; });
    });
    (all ? c.tp : c.fn) = 1;
    return c;
}

std::string emit_text(const ScanReport& r, const std::optional<GroundTruth>& truth) {
    std::ostringstream out;
    out << "target   " << r.target << "\n";
    if (!r.scenario.empty()) out << "scenario " << r.scenario << "\n";
    out << "seed " << r.config.seed << ", budget " << r.config.budget << ", occurrence limit "
        << r.config.occurrence_limit << "\n\n";

    out << "tokens:";
    if (r.capture.tokens.one_time.empty() && r.capture.tokens.session.empty()) out << " none";
    for (const auto& k : r.capture.tokens.one_time) out << " " << k.name << "@" << k.step;
    for (const auto& k : r.capture.tokens.session) out << " " << k.name << "@" << k.step << "(session)";
    out << "\ndependencies:";
    if (r.dependencies.confirmed.empty()) out << " none";
    for (const auto& d : r.dependencies.confirmed) {
        out << " " << d.candidate.key.name << "@" << d.candidate.key.step << "=" << d.candidate.prior_name << "@"
            << d.candidate.key.step - 1;
    }
    out << "\n\n";

    out << r.findings.size() << (r.findings.size() == 1 ? " finding" : " findings") << "\n";
    for (const auto& f : r.findings) {
        out << "  step " << f.step << " " << f.param << " (" << to_string(f.source) << "): '" << f.base_value
            << "' -> '" << f.mutated_value << "' [" << f.rule << "]\n";
        for (const auto& e : f.evidence.features) out << "      " << e << "\n";
    }
    if (!r.inconclusives.empty()) {
        out << r.inconclusives.size() << " inconclusive\n";
        for (const auto& i : r.inconclusives) out << "  step " << i.step << " " << i.param << ": " << i.reason << "\n";
    }
    out << "\nrequests " << r.counters.requests_sent << ", forced " << r.counters.forced_attempts << " (accepted "
        << r.counters.accepted << ", rejected " << r.counters.rejected << ", inconclusive " << r.counters.inconclusive
        << ")\n";
    if (truth) out << tally(r, *truth).line() << "\n";
    return out.str();
}

}  // namespace tamperscan

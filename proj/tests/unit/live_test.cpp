#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tamperscan/capture.hpp"
#include "tamperscan/cli.hpp"
#include "tamperscan/errors.hpp"
#include "tamperscan/fuzz.hpp"
#include "tamperscan/selftest.hpp"
#include "tamperscan/testbed.hpp"

using namespace tamperscan;

namespace {

struct Bed {
    Testbed bed;
    ActionScript script;

    explicit Bed(Scenario s) : bed(TestbedConfig{s}) {
        bed.start();
        script = with_base(ActionScript::parse(bundled_script(s)), bed.base_url());
    }
};

HttpRequest get(const std::string& url) {
    HttpRequest r;
    r.url = url;
    return r;
}

nlohmann::json json_of(const HttpResponse& r) { return nlohmann::json::parse(r.body); }

const Param* param(const TraceStep& s, const std::string& name) {
    for (const auto& p : s.params) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

bool has_violation(const Verdict& v, const std::string& field, const std::string& constraint) {
    return std::any_of(v.violations.begin(), v.violations.end(),
                       [&](const Violation& x) { return x.field == field && x.constraint == constraint; });
}

}  // namespace

TEST(Testbed, ScenarioNames) {
    for (auto s : all_scenarios()) EXPECT_EQ(scenario_from_string(to_string(s)), s);
    EXPECT_THROW(scenario_from_string("citibank"), ConfigError);
    for (auto c : {RejectCause::TokenMissing, RejectCause::TokenSpent, RejectCause::DependencyMismatch,
                   RejectCause::WorkflowOrder, RejectCause::ValidationFail}) {
        EXPECT_EQ(reject_cause_from_string(to_string(c)), c);
    }
}

TEST(Testbed, StepAPages) {
    Bed h(Scenario::HsbcLike);
    Session session;
    auto res = session.send(get(h.bed.base_url() + "/stepA"));
    EXPECT_EQ(res.status, 200);
    auto forms = extract_forms(Document::parse(res.body));
    ASSERT_EQ(forms.size(), 1u);
    ASSERT_TRUE(forms[0].control("CSRF1"));
    EXPECT_EQ(forms[0].control("CSRF1")->kind, ControlKind::Hidden);
    for (auto name : {"FROM", "TO", "AMT"}) EXPECT_TRUE(forms[0].control(name)) << name;

    Bed b(Scenario::BeaLike);
    auto bea = extract_forms(Document::parse(session.send(get(b.bed.base_url() + "/stepA")).body));
    ASSERT_TRUE(bea[0].clv);
    ASSERT_EQ(bea[0].clv->transform.size(), 1u);
    EXPECT_EQ(bea[0].clv->transform[0].target, "MACcode");
    EXPECT_EQ(bea[0].clv->transform[0].fn, TransformRule::Fn::Base64Concat);
}

TEST(Session, CookiesAreEchoed) {
    Bed h(Scenario::HsbcLike);
    Session session;
    session.send(get(h.bed.base_url() + "/_echo?set=SESSID=x"));
    auto echoed = json_of(session.send(get(h.bed.base_url() + "/_echo")));
    EXPECT_NE(echoed["cookie"].get<std::string>().find("SESSID=x"), std::string::npos);
    session.jar().clear();
    EXPECT_EQ(json_of(session.send(get(h.bed.base_url() + "/_echo")))["cookie"], "");
}

TEST(Session, EmptyPostBody) {
    Bed h(Scenario::HsbcLike);
    Session session;
    HttpRequest r = get(h.bed.base_url() + "/_echo");
    r.method = Method::Post;
    auto j = json_of(session.send(r));
    EXPECT_EQ(j["method"], "POST");
    EXPECT_EQ(j["body"], "");
    r.body_params = {{"a b", "c&d"}};
    EXPECT_EQ(json_of(session.send(r))["body"], "a+b=c%26d");
}

TEST(Session, Redirects) {
    Bed h(Scenario::HsbcLike);
    Session session;
    HttpRequest r = get(h.bed.base_url() + "/_redirect?code=302");
    r.method = Method::Post;
    r.body_params = {{"k", "v"}};
    auto res = session.send(r);
    EXPECT_EQ(res.status, 200);
    EXPECT_EQ(json_of(res)["method"], "GET");
    EXPECT_NE(res.final_url.find("/_echo"), std::string::npos);

    r.url = h.bed.base_url() + "/_redirect";
    r.query_params = {{"code", "307"}, {"hops", "2"}};
    res = session.send(r);
    EXPECT_EQ(json_of(res)["method"], "POST");
    EXPECT_EQ(json_of(res)["body"], "k=v");

    r.query_params = {{"code", "302"}, {"hops", "4"}};
    EXPECT_EQ(session.send(r).status, 200);
    r.query_params = {{"code", "302"}, {"hops", "5"}};
    EXPECT_EQ(session.send(r).status, 302);
}

TEST(Session, DeadServerIsATransportError) {
    std::string url;
    {
        Testbed bed(TestbedConfig{Scenario::HsbcLike});
        bed.start();
        url = bed.base_url();
    }
    Session session(SessionOptions{std::chrono::milliseconds(0), 5, std::chrono::seconds(2)});
    EXPECT_THROW(session.send(get(url + "/stepA")), TransportError);
    auto script = with_base(ActionScript::parse(bundled_script(Scenario::HsbcLike)), url);
    try {
        replay(script, session);
        FAIL() << "replay against a dead server succeeded";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.step(), 1);
    }
}

TEST(Replay, ValidRunReachesAcknowledgment) {
    Bed h(Scenario::HsbcLike);
    Session session;
    auto t1 = replay(h.script, session);
    ASSERT_TRUE(t1.complete(h.script));
    EXPECT_NE(t1.steps[1].response.body.find("Transfer completed"), std::string::npos);
    auto t2 = replay(h.script, session);
    ASSERT_TRUE(t2.complete(h.script));
    EXPECT_NE(param(t1.steps[0], "CSRF1")->value, param(t2.steps[0], "CSRF1")->value);
    EXPECT_EQ(param(t1.steps[0], "LOCALE")->value, "en");
    EXPECT_EQ(param(t1.steps[0], "AMT")->source, ParamSource::UserInput);
    EXPECT_TRUE(std::any_of(t1.steps[0].params.begin(), t1.steps[0].params.end(),
                            [](const Param& p) { return p.source == ParamSource::Cookie && p.name == "SESSID"; }));
    EXPECT_EQ(h.bed.transfers().size(), 2u);
}

TEST(Replay, OverrideHaltsUnlessForced) {
    Bed h(Scenario::HsbcLike);
    Session session;
    ReplayOptions o;
    o.overrides[1] = {{"TO", "nobody"}};
    auto t = replay(h.script, session, o);
    ASSERT_EQ(t.halted_step, 1);
    EXPECT_TRUE(t.steps.empty());
    EXPECT_TRUE(has_violation(t.halt_verdict, "TO", "pattern"));

    o.force = {1};
    o.stop_after = 1;
    t = replay(h.script, session, o);
    ASSERT_EQ(t.steps.size(), 1u);
    EXPECT_TRUE(t.steps[0].forced);
    EXPECT_NE(t.steps[0].response.body.find("unable to process"), std::string::npos);
    auto log = h.bed.log();
    ASSERT_FALSE(log.empty());
    EXPECT_EQ(log.back().cause, RejectCause::ValidationFail);
}

TEST(Replay, StepBCarriesTheForcedStepAValue) {
    Bed h(Scenario::HsbcLike);
    Session session;
    ReplayOptions o;
    o.overrides[1] = {{"TO", "FUND RECEIPIENT~~290 123456883"}};
    o.force = {1};
    auto t = replay(h.script, session, o);
    ASSERT_EQ(t.steps.size(), 2u);
    EXPECT_EQ(t.steps[1].values.at("TO"), "FUND RECEIPIENT~~290 123456883");
    EXPECT_NE(t.steps[1].response.body.find("Transfer completed"), std::string::npos);
    EXPECT_EQ(h.bed.transfers().back().to, "FUND RECEIPIENT~~290 123456883");
}

TEST(Capture, HsbcLike) {
    Bed h(Scenario::HsbcLike);
    Session session;
    auto c = capture(h.script, session);
    EXPECT_TRUE(c.tokens.one_time.contains({1, "CSRF1"}));
    EXPECT_TRUE(c.tokens.one_time.contains({2, "CSRF2"}));
    EXPECT_FALSE(c.tokens.contains({1, "UITOKEN"}));
    auto is_candidate = [&](int step, const std::string& name) {
        return std::any_of(c.token_candidates.begin(), c.token_candidates.end(),
                           [&](const TokenCandidate& t) { return t.key == StepKey{step, name}; });
    };
    EXPECT_TRUE(is_candidate(1, "UITOKEN"));
    EXPECT_FALSE(is_candidate(1, "LOCALE"));
    EXPECT_FALSE(is_candidate(1, "SESSID"));

    const auto* s1 = c.features.for_step(1);
    ASSERT_TRUE(s1);
    EXPECT_EQ(s1->next_button, Locator::element_id("confirm"));
    EXPECT_TRUE(std::any_of(s1->reflections.begin(), s1->reflections.end(),
                            [](const ReflectionFeature& r) { return r.param == "TO"; }));
    const auto* s2 = c.features.for_step(2);
    ASSERT_TRUE(s2);
    EXPECT_FALSE(s2->empty());

    EXPECT_TRUE(std::any_of(c.dependency_candidates.begin(), c.dependency_candidates.end(),
                            [](const DepCandidate& d) { return d.key == StepKey{2, "TO"}; }));
    for (const auto& d : c.dependency_candidates) EXPECT_FALSE(c.tokens.contains(d.key));
}

TEST(Capture, TrueNegativeAndAjax) {
    Bed b(Scenario::BocLike);
    Session s1;
    auto boc = capture(b.script, s1);
    EXPECT_EQ(boc.features.steps.size(), 2u);

    Bed a(Scenario::AjaxDate);
    Session s2;
    auto ajax = capture(a.script, s2);
    EXPECT_TRUE(ajax.tokens.one_time.contains({1, "tok"}));
    ASSERT_TRUE(ajax.features.for_step(1));
    EXPECT_FALSE(ajax.features.for_step(1)->empty());
}

TEST(Capture, FeaturelessStepNeedsAnalystRegex) {
    Bed a(Scenario::AjaxDate);
    Session session;
    auto [r1, r2] = run_capture(a.script, session);
    for (auto* t : {&r1, &r2}) {
        t->steps[0].response.body = "<p>Thanks</p>";
        t->steps[0].response.content_type = "text/html";
        t->steps[0].body = ParsedBody::parse(t->steps[0].response.body, "text/html");
        t->steps[0].values = {};
    }
    try {
        detect_valid_features(a.script, r1, r2, {});
        FAIL() << "expected a capture error";
    } catch (const CaptureError& e) {
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
    }
    auto f = detect_valid_features(a.script, r1, r2, {3, std::string("Thanks")});
    EXPECT_EQ(f.for_step(1)->accept_regex, "Thanks");
    EXPECT_THROW(detect_valid_features(a.script, r1, r2, {0, std::nullopt}), ConfigError);
}

TEST(Fuzz, ConfirmDependencies) {
    Bed h(Scenario::HsbcLike);
    Session session;
    FuzzPlan plan{h.script, capture(h.script, session), {}};
    auto map = confirm_dependencies(plan, session);
    ASSERT_TRUE(map.contains({2, "TO"}));
    EXPECT_EQ(map.confirmed.size(), 1u);
    EXPECT_TRUE(std::any_of(map.rejected.begin(), map.rejected.end(),
                            [](const DepCandidate& d) { return d.key == StepKey{2, "AMT"}; }));

    FuzzPlan none{h.script, plan.capture, {}};
    none.capture.dependency_candidates.clear();
    auto empty = confirm_dependencies(none, session);
    EXPECT_TRUE(empty.confirmed.empty() && empty.rejected.empty() && empty.unresolved.empty());
}

TEST(Fuzz, ClientRejectedSkipsAcceptedCandidates) {
    auto forms = extract_forms(Document::parse(R"(<form><input name=N pattern="^\d+$" value=100></form>)"));
    std::vector<MutationCandidate> cands{{"101", "increment", "100"}, {"99", "decrement", "100"}, {"-100", "negate", "100"}};
    std::size_t cursor = 0;
    auto r = get_client_rejected(forms[0], {{"N", "100"}}, "N", cands, cursor);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->candidate.value, "-100");
    EXPECT_EQ(cursor, 3u);
    EXPECT_FALSE(get_client_rejected(forms[0], {{"N", "100"}}, "N", cands, cursor));

    auto free = extract_forms(Document::parse("<form><input name=T></form>"));
    auto all = mutate(*free[0].control("T"), "hello", InputTypeHint::FreeText, {});
    cursor = 0;
    EXPECT_FALSE(get_client_rejected(free[0], {{"T", "hello"}}, "T", all, cursor));
    EXPECT_EQ(cursor, all.size());
}

TEST(Fuzz, RevealedControlsAreReported) {
    auto forms = extract_forms(Document::parse(
        R"(<form data-clv='{"reveal":[{"when":{"field":"N","equals":"0"},"add":[{"name":"OTP","type":"text","required":true}]}]}'>
           <input name=N pattern="[1-9]\d*" value=1></form>)"));
    auto cands = mutate(*forms[0].control("N"), "1", InputTypeHint::Number, {});
    std::size_t cursor = 0;
    std::vector<std::string> revealed;
    auto r = get_client_rejected(forms[0], {{"N", "1"}}, "N", cands, cursor, &revealed);
    while (r && r->candidate.value != "0") r = get_client_rejected(forms[0], {{"N", "1"}}, "N", cands, cursor, &revealed);
    ASSERT_TRUE(r);
    EXPECT_EQ(std::count(revealed.begin(), revealed.end(), "OTP"), 1);
}

TEST(Fuzz, Excerpt) {
    EXPECT_EQ(excerpt("short"), "short");
    std::string e;
    for (int i = 0; i < 10; ++i) e += "\xc3\xa9";
    EXPECT_EQ(excerpt(e, 5), e.substr(0, 4));
    EXPECT_EQ(excerpt(std::string(600, 'a')).size(), 512u);
}

TEST(Fuzz, HsbcScanEndToEnd) {
    auto run = run_scenario(Scenario::HsbcLike, {});
    ASSERT_FALSE(run.error) << *run.error;
    ASSERT_FALSE(run.report.findings.empty());
    for (const auto& f : run.report.findings) {
        EXPECT_EQ(f.param, "TO");
        EXPECT_EQ(f.step, 1);
        EXPECT_FALSE(f.evidence.features.empty());
        EXPECT_FALSE(f.violations.empty());
    }
    auto outcome = [&](int step, const std::string& name) {
        for (const auto& o : run.report.outcomes) {
            if (o.step == step && o.param == name) return o;
        }
        return ParamOutcome{};
    };
    EXPECT_EQ(outcome(1, "CSRF1").status, "exempt-token");
    EXPECT_EQ(outcome(2, "CSRF2").status, "exempt-token");
    EXPECT_EQ(outcome(2, "TO").status, "exempt-dependent");
    EXPECT_EQ(outcome(1, "AMT").findings, 0);
    EXPECT_EQ(parse_report(emit_json(run.report)), run.report);
}

TEST(Fuzz, StaleCaptureIsAScanError) {
    Bed h(Scenario::HsbcLike);
    Session session;
    FuzzPlan plan{h.script, capture(h.script, session), {}};
    plan.capture.features.steps[0].next_button = Locator::element_id("no-such-button");
    EXPECT_THROW(scan(plan, session), ScanError);
}

namespace {

int run_binary(const std::string& args) {
    std::string cmd = std::string(TAMPERSCAN_BIN) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run_binary("scan"), kExitUsage);
    EXPECT_EQ(run_binary("no-such-command"), kExitUsage);
    EXPECT_EQ(run_binary("testbed --scenario citibank --port 0"), kExitError);
    EXPECT_EQ(run_binary("scan --script /nonexistent.json"), kExitUsage);

    auto dir = std::filesystem::temp_directory_path() / "tamperscan_cli_test";
    std::filesystem::create_directories(dir);
    for (auto s : {Scenario::HsbcLike, Scenario::BocLike}) {
        Bed bed(s);
        auto script = dir / (std::string(to_string(s)) + ".json");
        std::ofstream(script) << bundled_script(s);
        auto report = dir / (std::string(to_string(s)) + "-report.json");
        int code = run_binary("scan --script " + script.string() + " --base " + bed.bed.base_url() + " --report " +
                              report.string());
        EXPECT_EQ(code, s == Scenario::BocLike ? kExitClean : kExitFindings);
        std::ifstream in(report);
        std::stringstream text;
        text << in.rdbuf();
        auto parsed = parse_report(text.str());
        EXPECT_EQ(parsed.findings.empty(), s == Scenario::BocLike);
    }
    Bed bed(Scenario::HsbcLike);
    auto dump = dir / "analysis.json";
    EXPECT_EQ(run_binary("capture --script " + (dir / "hsbc-like.json").string() + " --base " + bed.bed.base_url() +
                         " --dump " + dump.string()),
              kExitClean);
    std::ifstream in(dump);
    auto j = nlohmann::json::parse(in);
    EXPECT_TRUE(j["capture"].contains("token_candidates"));
    EXPECT_TRUE(j["capture"].contains("features"));
    EXPECT_EQ(run_binary("selftest"), kExitClean);
}

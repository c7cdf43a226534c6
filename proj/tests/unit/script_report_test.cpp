#include <gtest/gtest.h>

#include "tamperscan/action_script.hpp"
#include "tamperscan/errors.hpp"
#include "tamperscan/report.hpp"

using namespace tamperscan;

TEST(Script, ParseAndCount) {
    auto s = ActionScript::parse(
        R"({"actions":[{"navigate":"/stepA"},{"fill":{"at":"#amt","value":"1"}},{"click":"#go"}]})");
    EXPECT_EQ(s.actions.size(), 3u);
    EXPECT_EQ(s.step_count(), 1);
    EXPECT_EQ(std::get<Fill>(s.actions[1]), (Fill{Locator::element_id("amt"), "1"}));
    EXPECT_EQ(s.click_of(1), Locator::element_id("go"));
    EXPECT_FALSE(s.click_of(2));

    auto two = ActionScript::parse(
        R"({"scenario":"x","base":"http://h:1","actions":[{"navigate":"/a"},{"click":"#go"},{"choose":{"at":"form[0]/name=B","value":"y"}},{"click":"#confirm"}]})");
    EXPECT_EQ(two.step_count(), 2);
    EXPECT_EQ(two.base_url, "http://h:1");
    EXPECT_EQ(two.click_of(2), Locator::element_id("confirm"));
}

TEST(Script, ParseErrorsNameTheProblem) {
    auto message = [](const char* text) {
        try {
            ActionScript::parse(text);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message(R"({"actions":[]})").find("empty"), std::string::npos);
    EXPECT_NE(message("[1,2").find("JSON"), std::string::npos);
    EXPECT_NE(message(R"({"actions":[{"navigate":"/a"},{"fill":{"at":"#a"}}]})").find("actions[1]"), std::string::npos);
    EXPECT_NE(message(R"({"actions":[{"navigate":"/a"},{"jump":"#a"}]})").find("jump"), std::string::npos);
    EXPECT_NE(message(R"({"actions":[{"click":"#a"}]})").find("navigate"), std::string::npos);
    EXPECT_NE(message(R"({"actions":[{"navigate":"/a"}]})").find("click"), std::string::npos);
    EXPECT_NE(message(R"({"actions":[{"navigate":"/a"},{"click":"form[q]"}]})").find("actions[1]"), std::string::npos);
}

namespace {

ScanReport sample_report() {
    ScanReport r;
    r.target = "http://127.0.0.1:8080";
    r.scenario = "hsbc-like";
    r.config = {7, 5, 2, 10, std::string("Thank you"), true};

    TokenCandidate tc{{1, "CSRF1"}, ParamSource::HiddenField, false, "abc", "def"};
    TokenCandidate decoy{{1, "UITOKEN"}, ParamSource::HiddenField, false, "x", "y"};
    TokenCandidate sid{{1, "SID"}, ParamSource::QueryString, true, "s1", "s2"};
    r.capture.token_candidates = {tc, decoy, sid};
    r.capture.tokens.one_time.insert(tc.key);
    r.capture.tokens.session.insert(sid.key);
    DepCandidate dep{{2, "TO"}, "TO", "FUND~~1", "FUND~~1"};
    DepCandidate amt{{2, "AMT"}, "AMT", "1250", "1,250"};
    r.capture.dependency_candidates = {dep, amt};

    StepFeatures f1;
    f1.step = 1;
    f1.next_button = Locator::element_id("confirm");
    f1.reflections.push_back({"TO", MatchMode::String, 1, {Locator::child_path({1, 3, 1})}});
    f1.reflections.push_back({"AMT", MatchMode::Numeric, 2, {Locator::child_path({1, 3, 2}), Locator::json("$.a[0]")}});
    StepFeatures f2;
    f2.step = 2;
    f2.keyword = true;
    f2.accept_regex = "Thank";
    StepFeatures f3;
    f3.step = 3;
    f3.status_only = true;
    r.capture.features.steps = {f1, f2, f3};

    r.dependencies.confirmed.push_back({dep, "FUND~~2", {"button", "reflection:TO"}});
    r.dependencies.rejected.push_back(amt);
    r.dependencies.unresolved.push_back({{2, "X"}, "Y", "1", "1"});

    Finding f;
    f.step = 1;
    f.param = "TO";
    f.source = ParamSource::UserInput;
    f.base_value = "FUND~~1";
    f.mutated_value = "FUND~~2\"<x>";
    f.rule = "increment";
    f.violations = {{"TO", "option"}, {"TO", "pattern"}};
    f.evidence = {{"button #confirm", "reflection TO @ path:1/3/1"}, "POST /review\nTO=FUND", "<html>é</html>"};
    f.timestamp = "2026-10-16T10:00:00Z";
    r.findings = {f};
    r.inconclusives = {{1, "AMT", "-1", "transport: connection refused"}};
    r.outcomes = {{1, "TO", ParamSource::UserInput, "fuzzed", 4, 3, 1},
                  {1, "CSRF1", ParamSource::HiddenField, "exempt-token", 0, 0, 0},
                  {1, "UITOKEN", ParamSource::HiddenField, "exhausted", 12, 0, 0}};
    r.counters = {120, 9, 3, 6, 1, {{"button", 4}, {"reflection", 2}}};
    return r;
}

}  // namespace

TEST(Report, RoundTrip) {
    auto r = sample_report();
    auto text = emit_json(r);
    EXPECT_EQ(parse_report(text), r);
    EXPECT_EQ(emit_json(parse_report(text)), text);
}

TEST(Report, EmptyFindings) {
    ScanReport r;
    auto j = nlohmann::json::parse(emit_json(r));
    EXPECT_EQ(j.at("schema_version"), kReportSchemaVersion);
    EXPECT_TRUE(j.at("findings").is_array());
    EXPECT_TRUE(j.at("findings").empty());
    EXPECT_EQ(parse_report(emit_json(r)), r);
}

TEST(Report, RejectsBadInput) {
    EXPECT_THROW(parse_report("{"), ParseError);
    EXPECT_THROW(parse_report(R"({"schema_version":99})"), ParseError);
    auto j = nlohmann::json::parse(emit_json(sample_report()));
    j["findings"][0].erase("param");
    EXPECT_THROW(parse_report(j.dump()), ParseError);
}

TEST(Report, CaptureSummaryMarksTokenStatus) {
    auto j = to_json(sample_report().capture);
    ASSERT_EQ(j.at("token_candidates").size(), 3u);
    EXPECT_EQ(j["token_candidates"][0]["status"], "one-time");
    EXPECT_EQ(j["token_candidates"][1]["status"], "unconfirmed");
    EXPECT_EQ(j["token_candidates"][2]["status"], "session");
    EXPECT_EQ(capture_summary_from_json(nlohmann::json::parse(j.dump())), sample_report().capture);
}

TEST(Report, TallyAndText) {
    auto r = sample_report();
    EXPECT_EQ(tally(r, {{"TO"}}).tp, 1);
    EXPECT_EQ(tally(r, {{"TO", "DATE"}}).fn, 1);
    EXPECT_EQ(tally(r, {}).fp, 1);
    r.findings.clear();
    EXPECT_EQ(tally(r, {}).tn, 1);
    EXPECT_EQ(tally(r, {{"TO"}}).fn, 1);

    Confusion c{1, 0, 0, 0};
    c += {2, 0, 1, 0};
    EXPECT_EQ(c.tp, 3);
    EXPECT_EQ(c.tn, 1);
    EXPECT_NE(c.line().find("TP=3"), std::string::npos);

    auto text = emit_text(sample_report(), GroundTruth{{"TO"}});
    EXPECT_NE(text.find("TO"), std::string::npos);
    EXPECT_NE(text.find("increment"), std::string::npos);
}

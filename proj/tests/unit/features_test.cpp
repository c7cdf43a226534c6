#include <random>
#include <regex>

#include <gtest/gtest.h>

#include "synthetic_traces.hpp"
#include "tamperscan/capture.hpp"
#include "tamperscan/features.hpp"

using namespace tamperscan;

struct KeywordCase {
    const char* text;
    bool accepts;
};

// Expected outcomes obtained by applying both published regexes by hand.
const KeywordCase kKeywordCases[] = {
    {"Transaction completed", true},
    {"Update did not complete", false},
    {"Updated successfully", true},
    {"successfully", false},
    {"Success", true},
    {"Payment successful", true},
    {"Done", true},
    {"OK", true},
    {"Okay, executed", true},
    {"Query completed", true},
    {"Sorry, the update failed", false},
    {"Transfer couldn't be completed", false},
    {"Error: done", false},
    {"Undone", false},
    {"completion pending", false},
    {"book", false},
    {"errand done", true},
    {"Don't worry, all done", false},
    {"Request failed: session expired", false},
    {"Your request has expired. Please start the transfer again.", false},
};

TEST(Keyword, PublishedRegexSuite) {
    for (const auto& c : kKeywordCases) EXPECT_EQ(keyword_accepts(c.text), c.accepts) << c.text;
    EXPECT_TRUE(positive_keyword("Update did not complete"));
    EXPECT_TRUE(negative_keyword("Update did not complete"));
    EXPECT_FALSE(positive_keyword("successfully"));
}

TEST(Reflection, NumericPatternShape) {
    EXPECT_EQ(numeric_reflection_pattern("12345"), R"(1[^\d]?2[^\d]?3[^\d]?4[^\d]?5)");
    EXPECT_EQ(numeric_reflection_pattern("7"), "7");
    EXPECT_EQ(numeric_reflection_pattern("1,2"), R"(1[^\d]?2)");
}

TEST(Reflection, DollarAmount) {
    std::vector<LeafText> leaves{{Locator::child_path({0, 1}), "$12,345.00"}};
    auto hits = find_reflections(leaves, "12345", MatchMode::Numeric);
    EXPECT_EQ(hits.count, 1);
    ASSERT_EQ(hits.where.size(), 1u);
    EXPECT_EQ(hits.where[0], Locator::child_path({0, 1}));
    EXPECT_EQ(match_mode_for("12345"), MatchMode::Numeric);
    EXPECT_EQ(match_mode_for("FUND~~1"), MatchMode::String);
}

TEST(Reflection, StringModeCountsNonOverlapping) {
    std::vector<LeafText> leaves{{Locator::child_path({0}), "aaaa"}, {Locator::child_path({1}), " ab  "}};
    EXPECT_EQ(find_reflections(leaves, "aa", MatchMode::String).count, 2);
    EXPECT_EQ(find_reflections(leaves, " ab ", MatchMode::String).count, 1);
    EXPECT_EQ(find_reflections(leaves, "zz", MatchMode::String).count, 0);
}

// Any interleaving of a digit string with at most one non-digit between digits matches.
TEST(Reflection, InterleavingProperty) {
    std::mt19937_64 rng(11);
    const std::string separators = ",. $-/ax";
    for (int i = 0; i < 500; ++i) {
        std::string digits;
        for (int n = 1 + static_cast<int>(rng() % 10); n > 0; --n) digits.push_back(static_cast<char>('0' + rng() % 10));
        std::string text;
        for (std::size_t k = 0; k < digits.size(); ++k) {
            text.push_back(digits[k]);
            if (k + 1 < digits.size() && rng() % 2) text.push_back(separators[rng() % separators.size()]);
        }
        std::regex re(numeric_reflection_pattern(digits));
        EXPECT_TRUE(std::regex_search(text, re)) << digits << " in " << text;
        EXPECT_TRUE(std::regex_search(digits, re));
        EXPECT_EQ(find_reflections({{Locator::child_path({0}), "x" + text + "y"}}, digits, MatchMode::Numeric).count, 1);
        if (digits.size() > 1) {
            std::string two = digits;
            two.insert(1, "--");
            EXPECT_FALSE(std::regex_search(two, re));
        }
    }
}

TEST(Normalize, Examples) {
    EXPECT_EQ(normalize_value("1,234.50"), normalize_value("1234.5"));
    EXPECT_TRUE(normalize_value("1,234.50").numeric);
    EXPECT_EQ(normalize_value(" abc "), normalize_value("abc"));
    EXPECT_FALSE(normalize_value("042") == normalize_value("42.1"));
    EXPECT_EQ(normalize_value("042"), normalize_value("42"));
    EXPECT_FALSE(normalize_value(",") == normalize_value(","));
    EXPECT_FALSE(normalize_value("1e3") == normalize_value("1000"));
    EXPECT_TRUE(is_numeric_value("1,234.50"));
    EXPECT_FALSE(is_numeric_value("-1"));
    EXPECT_FALSE(is_numeric_value("1."));
}

namespace {

SubmissionTrace trace_of(std::vector<std::vector<Param>> steps) {
    SubmissionTrace t;
    int i = 0;
    for (auto& params : steps) {
        TraceStep s;
        s.index = ++i;
        s.params = std::move(params);
        t.steps.push_back(std::move(s));
    }
    return t;
}

}  // namespace

TEST(Dependencies, Examples) {
    auto t = trace_of({{{"TO", "012-345", ParamSource::UserInput, {}}},
                       {{"ACCT", "012-345", ParamSource::HiddenField, {}}}});
    auto c = detect_dependency_candidates(t);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].key, (StepKey{2, "ACCT"}));
    EXPECT_EQ(c[0].prior_name, "TO");

    t = trace_of({{{"AMT", "1,234.50", ParamSource::UserInput, {}}}, {{"AMT", "1234.5", ParamSource::HiddenField, {}}}});
    EXPECT_EQ(detect_dependency_candidates(t).size(), 1u);

    t = trace_of({{{"AMT", "1", ParamSource::UserInput, {}}}});
    EXPECT_TRUE(detect_dependency_candidates(t).empty());

    t = trace_of({{{"SESSID", "x", ParamSource::Cookie, {}}}, {{"SESSID", "x", ParamSource::Cookie, {}}}});
    EXPECT_TRUE(detect_dependency_candidates(t).empty());
}

TEST(Dependencies, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    int with_candidates = 0;
    for (int i = 0; i < 200; ++i) {
        auto trace = oracle::random_two_step_trace(rng);
        auto expected = oracle::brute_force_dependencies(trace);
        EXPECT_EQ(oracle::as_tuples(detect_dependency_candidates(trace)), expected);
        with_candidates += !expected.empty();
    }
    EXPECT_GT(with_candidates, 20);
}

TEST(Features, ClassifyKeywordAndStatus) {
    TraceStep step;
    step.body = ParsedBody::parse(R"({"success":1,"message":"Query completed"})", "application/json");
    step.response.status = 200;
    StepFeatures kw;
    kw.step = 1;
    kw.keyword = true;
    EXPECT_TRUE(classify_step(kw, step).accepted);
    step.body = ParsedBody::parse(R"({"success":0,"message":"Request failed: x"})", "application/json");
    auto c = classify_step(kw, step);
    EXPECT_FALSE(c.accepted);
    EXPECT_EQ(c.missing, std::vector<std::string>{"keyword"});

    StepFeatures st;
    st.status_only = true;
    step.body = ParsedBody::parse("", "");
    step.response.status = 204;
    EXPECT_TRUE(classify_step(st, step).accepted);
    step.response.status = 500;
    EXPECT_FALSE(classify_step(st, step).accepted);
}

TEST(Features, ReflectionUsesSubmittedValue) {
    TraceStep step;
    step.values = {{"AMT", "12345"}};
    step.params = {{"AMT", "12345", ParamSource::UserInput, {}}};
    step.body = ParsedBody::parse("<p>Amount $12,345.00</p>", "text/html");
    StepFeatures f;
    f.reflections.push_back({"AMT", MatchMode::Numeric, 1, {}});
    EXPECT_TRUE(classify_step(f, step).accepted);
    step.values["AMT"] = "999";
    step.params[0].value = "999";
    EXPECT_FALSE(classify_step(f, step).accepted);
}

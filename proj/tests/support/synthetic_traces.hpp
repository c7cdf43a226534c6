#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <regex>
#include <string>
#include <tuple>
#include <vector>

#include "tamperscan/capture.hpp"

namespace tamperscan::oracle {

// Values chosen so that string, numeric, comma and whitespace cases collide often.
inline const std::vector<std::string>& value_pool() {
    static const std::vector<std::string> pool{
        "1,234.50", "1234.5", "1234.50", " 1234.5", "12,34.5", "42", "042", "42.0", " 42 ", "4,2",
        "0", "0.0", "", " ", ",", "abc", " abc", "abc ", "ABC", "012-345", "012-345 ", "Y", "N",
        "9,999,999", "9999999", "1e3", "1000", "3.14", "3.140", "x1", "1x"};
    return pool;
}

// Independent re-statement of the normalization: numeric iff `^[\d,]+(?:\.\d+)?$`,
// then commas dropped and parsed as a decimal; otherwise trimmed text.
struct OracleValue {
    bool numeric = false;
    double number = 0;
    std::string text;
};

inline OracleValue oracle_normalize(const std::string& v) {
    static const std::regex numeric(R"(^[\d,]+(?:\.\d+)?$)");
    OracleValue o;
    if (std::regex_match(v, numeric)) {
        o.numeric = true;
        std::string digits;
        for (char c : v) {
            if (c != ',') digits += c;
        }
        char* end = nullptr;
        o.number = digits.empty() ? NAN : std::strtod(digits.c_str(), &end);
        if (!digits.empty() && end == digits.c_str()) o.number = NAN;
        return o;
    }
    std::size_t b = 0, e = v.size();
    while (b < e && std::isspace(static_cast<unsigned char>(v[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(v[e - 1]))) --e;
    o.text = v.substr(b, e - b);
    return o;
}

inline bool oracle_equal(const OracleValue& a, const OracleValue& b) {
    if (a.numeric != b.numeric) return false;
    if (a.numeric) return !std::isnan(a.number) && a.number == b.number;
    return a.text == b.text;
}

using DepTuple = std::tuple<int, std::string, std::string, std::string, std::string>;

// O(n^2): each non-cookie param of request k against each non-cookie param of
// request k-1, first match in document order, one candidate per (step, name).
inline std::vector<DepTuple> brute_force_dependencies(const SubmissionTrace& trace) {
    std::vector<DepTuple> out;
    for (std::size_t k = 1; k < trace.steps.size(); ++k) {
        for (const auto& p : trace.steps[k].params) {
            if (p.source == ParamSource::Cookie) continue;
            bool dup = false;
            for (const auto& t : out) dup = dup || (std::get<0>(t) == static_cast<int>(k + 1) && std::get<1>(t) == p.name);
            if (dup) continue;
            for (const auto& q : trace.steps[k - 1].params) {
                if (q.source == ParamSource::Cookie) continue;
                if (oracle_equal(oracle_normalize(p.value), oracle_normalize(q.value))) {
                    out.emplace_back(static_cast<int>(k + 1), p.name, q.name, p.value, q.value);
                    break;
                }
            }
        }
    }
    return out;
}

inline std::vector<DepTuple> as_tuples(const std::vector<DepCandidate>& candidates) {
    std::vector<DepTuple> out;
    for (const auto& d : candidates) out.emplace_back(d.key.step, d.key.name, d.prior_name, d.value, d.prior_value);
    return out;
}

// Two steps of 1..8 params each, drawn from the pool, with some cookies mixed in.
inline SubmissionTrace random_two_step_trace(std::mt19937_64& rng) {
    static const ParamSource sources[] = {ParamSource::UserInput, ParamSource::HiddenField, ParamSource::QueryString,
                                          ParamSource::Cookie};
    const auto& pool = value_pool();
    SubmissionTrace trace;
    for (int s = 1; s <= 2; ++s) {
        TraceStep step;
        step.index = s;
        int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            Param p;
            p.name = "P" + std::to_string(s) + "_" + std::to_string(i);
            p.value = pool[rng() % pool.size()];
            p.source = sources[rng() % 4];
            step.params.push_back(std::move(p));
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

}  // namespace tamperscan::oracle

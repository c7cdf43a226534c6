#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tamperscan/form.hpp"
#include "tamperscan/html.hpp"
#include "tamperscan/session.hpp"

namespace tamperscan {

struct Navigate {
    std::string url;  // absolute, or relative to the script base
    bool operator==(const Navigate&) const = default;
};

struct Fill {
    Locator at;
    std::string value;
    bool operator==(const Fill&) const = default;
};

// Select an option, radio value or checkbox by value.
struct Choose {
    Locator at;
    std::string value;
    bool operator==(const Choose&) const = default;
};

struct SubmitClick {
    Locator at;
    bool operator==(const SubmitClick&) const = default;
};

using Action = std::variant<Navigate, Fill, Choose, SubmitClick>;

// Analyst-recorded actions. Each SubmitClick ends one workflow step (steps are 1-based).
struct ActionScript {
    std::string scenario;
    std::string base_url;
    std::vector<Action> actions;

    // Throws ParseError naming the offending action and field.
    static ActionScript parse(std::string_view json_text);

    int step_count() const;
    // Click locator of a step, or nothing past the last step.
    std::optional<Locator> click_of(int step) const;
};

struct TraceStep {
    int index = 0;
    Locator click;
    Form form;  // effective form (revealed controls included)
    std::string page_url;
    FieldValues values;  // post-preprocessing: what was actually sent
    std::vector<Param> params;  // sent parameters incl. cookies, with sources
    Verdict verdict;
    bool forced = false;
    HttpRequest request;
    HttpResponse response;
    ParsedBody body;  // parsed response
    ParsedBody page;  // page the click happened on
    ParsedBody next_page;  // page current after this step (same as `page` for AJAX)
};

struct SubmissionTrace {
    std::vector<TraceStep> steps;
    // Set when a client-side rejection stopped the replay (step not sent).
    std::optional<int> halted_step;
    Verdict halt_verdict;
    // Set when a step hook aborted the replay (nothing sent for that step).
    std::optional<int> aborted_step;

    bool complete(const ActionScript& script) const {
        return !halted_step && !aborted_step && static_cast<int>(steps.size()) == script.step_count();
    }
};

// Mutable view of a step just before submission.
struct StepContext {
    int step = 0;
    const Form& live_form;  // as parsed from the live page, before reveal
    const std::string& page_url;
    FieldValues& values;
    FieldValues& query_values;  // action query-string parameters by name
    bool force = false;
    bool abort = false;
};

struct ReplayOptions {
    std::map<int, FieldValues> overrides;
    std::set<int> force;
    std::optional<int> stop_after;
    bool keep_session = false;  // reuse the jar instead of starting a new server session
    std::function<void(StepContext&)> before_submit;
};

// Hidden and query-string values from the live form, user inputs from the script.
FieldValues fresh_values(const Form& live_form, const FieldValues& script_values);

// Replays the script from its first action. Throws ReplayError when a locator no
// longer resolves and TransportError (with the step) on connection failure.
SubmissionTrace replay(const ActionScript& script, Session& session, const ReplayOptions& options = {});

}  // namespace tamperscan

#include "tamperscan/action_script.hpp"

#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

namespace {

std::string field_path(std::size_t index, std::string_view kind, std::string_view field = {}) {
    std::string out = "actions[" + std::to_string(index) + "]." + std::string(kind);
    if (!field.empty()) out += "." + std::string(field);
    return out;
}

std::string required_string(const nlohmann::json& obj, std::string_view key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) throw ParseError(where + ": expected a string '" + std::string(key) + "'");
    return it->get<std::string>();
}

Locator parse_locator(const std::string& text, const std::string& where) {
    try {
        return Locator::parse(text);
    } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
    }
}

}  // namespace

ActionScript ActionScript::parse(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("script is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("script must be a JSON object");

    ActionScript script;
    if (auto it = doc.find("scenario"); it != doc.end() && it->is_string()) script.scenario = it->get<std::string>();
    if (auto it = doc.find("base"); it != doc.end() && it->is_string()) script.base_url = it->get<std::string>();

    auto actions = doc.find("actions");
    if (actions == doc.end() || !actions->is_array()) throw ParseError("script has no 'actions' array");
    if (actions->empty()) throw ParseError("script has an empty 'actions' array");

    for (std::size_t i = 0; i < actions->size(); ++i) {
        const auto& a = (*actions)[i];
        std::string where = "actions[" + std::to_string(i) + "]";
        if (!a.is_object() || a.size() != 1) throw ParseError(where + ": expected an object with exactly one action");
        const auto& [kind, body] = *a.items().begin();
        if (kind == "navigate") {
            if (!body.is_string()) throw ParseError(field_path(i, kind) + ": expected a URL string");
            script.actions.emplace_back(Navigate{body.get<std::string>()});
        } else if (kind == "fill" || kind == "choose") {
            if (!body.is_object()) throw ParseError(field_path(i, kind) + ": expected {\"at\",\"value\"}");
            auto at = parse_locator(required_string(body, "at", field_path(i, kind)), field_path(i, kind, "at"));
            auto value = required_string(body, "value", field_path(i, kind));
            if (kind == "fill") {
                script.actions.emplace_back(Fill{std::move(at), std::move(value)});
            } else {
                script.actions.emplace_back(Choose{std::move(at), std::move(value)});
            }
        } else if (kind == "click") {
            if (!body.is_string()) throw ParseError(field_path(i, kind) + ": expected a locator string");
            script.actions.emplace_back(SubmitClick{parse_locator(body.get<std::string>(), field_path(i, kind))});
        } else {
            throw ParseError(where + ": unknown action kind '" + kind + "'");
        }
    }
    if (!std::holds_alternative<Navigate>(script.actions.front())) {
        throw ParseError("actions[0]: the first action must be 'navigate'");
    }
    if (script.step_count() == 0) throw ParseError("script has no 'click' action");
    return script;
}

int ActionScript::step_count() const {
    int n = 0;
    for (const auto& a : actions) n += std::holds_alternative<SubmitClick>(a) ? 1 : 0;
    return n;
}

std::optional<Locator> ActionScript::click_of(int step) const {
    int n = 0;
    for (const auto& a : actions) {
        if (const auto* click = std::get_if<SubmitClick>(&a); click && ++n == step) return click->at;
    }
    return std::nullopt;
}

FieldValues fresh_values(const Form& live_form, const FieldValues& script_values) {
    FieldValues values = default_values(live_form);
    for (const auto& [name, value] : script_values) {
        const auto* control = live_form.control(name);
        if (control && control->kind == ControlKind::Hidden) continue;
        values[name] = value;
    }
    return values;
}

namespace {

struct PageState {
    ParsedBody body;
    std::string url;
    std::vector<Form> forms;
    std::map<std::pair<std::size_t, std::string>, std::string> script_values;

    void load(ParsedBody parsed, std::string page_url) {
        body = std::move(parsed);
        url = std::move(page_url);
        forms = body.html() ? extract_forms(*body.html()) : std::vector<Form>{};
        script_values.clear();
    }
};

HttpResponse send_at_step(Session& session, const HttpRequest& request, int step) {
    try {
        return session.send(request);
    } catch (const TransportError& e) {
        throw TransportError(std::string("step ") + std::to_string(step) + ": " + e.what(), step);
    }
}

bool has_field(const Form& form, const std::string& name) {
    if (form.control(name)) return true;
    if (!form.clv) return false;
    for (const auto& rule : form.clv->reveal) {
        for (const auto& c : rule.add) {
            if (c.name == name) return true;
        }
    }
    return false;
}

}  // namespace

SubmissionTrace replay(const ActionScript& script, Session& session, const ReplayOptions& options) {
    if (!options.keep_session) session.jar().clear();

    SubmissionTrace trace;
    std::optional<PageState> page;
    int step = 0;

    auto require_page = [&](const Locator& at) -> PageState& {
        if (!page || !page->body.html()) {
            throw ReplayError("no HTML page is loaded at step " + std::to_string(step + 1), step + 1, at.to_string());
        }
        return *page;
    };

    for (const auto& action : script.actions) {
        if (const auto* nav = std::get_if<Navigate>(&action)) {
            if (!is_absolute_url(nav->url) && script.base_url.empty()) {
                throw ConfigError("navigate '" + nav->url + "' is relative and the script has no base URL");
            }
            Url url = is_absolute_url(nav->url) ? Url::parse(nav->url) : resolve(Url::parse(script.base_url), nav->url);
            HttpRequest request;
            request.url = url.without_query();
            request.query_params = form_decode(url.query);
            auto response = send_at_step(session, request, step + 1);
            if (!page) page.emplace();
            page->load(ParsedBody::parse(response.body, response.content_type), response.final_url);
            continue;
        }

        if (const auto* fill = std::get_if<Fill>(&action)) {
            auto& p = require_page(fill->at);
            auto target = resolve_control(*p.body.html(), p.forms, fill->at);
            if (!target) throw ReplayError("fill target not found", step + 1, fill->at.to_string());
            p.script_values[*target] = fill->value;
            continue;
        }

        if (const auto* choose = std::get_if<Choose>(&action)) {
            auto& p = require_page(choose->at);
            auto target = resolve_control(*p.body.html(), p.forms, choose->at);
            if (!target) throw ReplayError("choose target not found", step + 1, choose->at.to_string());
            p.script_values[*target] = choose->value;
            continue;
        }

        const auto& click = std::get<SubmitClick>(action);
        ++step;
        auto& p = require_page(click.at);
        auto form_index = form_of_button(p.forms, click.at);
        if (!form_index) throw ReplayError("submit control not found", step, click.at.to_string());
        const Form live_form = p.forms[*form_index];

        FieldValues script_values;
        for (const auto& [key, value] : p.script_values) {
            if (key.first == *form_index) script_values[key.second] = value;
        }
        FieldValues values = fresh_values(live_form, script_values);
        FieldValues query_values;
        {
            Url action_url = resolve(Url::parse(p.url), live_form.action);
            for (auto& [k, v] : form_decode(action_url.query)) query_values.emplace(std::move(k), std::move(v));
        }
        if (auto it = options.overrides.find(step); it != options.overrides.end()) {
            for (const auto& [name, value] : it->second) {
                if (has_field(live_form, name)) {
                    values[name] = value;
                } else if (query_values.contains(name)) {
                    query_values[name] = value;
                } else {
                    throw ReplayError("override names unknown parameter '" + name + "'", step, click.at.to_string());
                }
            }
        }

        StepContext ctx{step, live_form, p.url, values, query_values, options.force.contains(step), false};
        if (options.before_submit) options.before_submit(ctx);
        if (ctx.abort) {
            trace.aborted_step = step;
            return trace;
        }

        Prepared prepared = prepare_submission(live_form, values);
        if (!prepared.verdict.accepted() && !ctx.force) {
            trace.halted_step = step;
            trace.halt_verdict = prepared.verdict;
            return trace;
        }

        TraceStep ts;
        ts.index = step;
        ts.click = click.at;
        ts.page_url = p.url;
        ts.verdict = prepared.verdict;
        ts.forced = !prepared.verdict.accepted();
        ts.request = build_submission(prepared.form, prepared.values, p.url, query_values);
        ts.params = submission_params(prepared.form, prepared.values, p.url, query_values);
        for (const auto& cookie : session.jar().cookies_for(Url::parse(ts.request.url))) {
            ts.params.push_back({cookie.name, cookie.value, ParamSource::Cookie, Locator::element_id("cookie:" + cookie.name)});
        }
        ts.form = std::move(prepared.form);
        ts.values = std::move(prepared.values);
        ts.page = p.body;

        ts.response = send_at_step(session, ts.request, step);
        ts.body = ParsedBody::parse(ts.response.body, ts.response.content_type);
        if (ts.form.mode != SubmissionMode::Ajax) p.load(ts.body, ts.response.final_url);
        ts.next_page = p.body;
        spdlog::debug("step {} {} {} -> {}", step, to_string(ts.request.method), ts.request.url, ts.response.status);
        trace.steps.push_back(std::move(ts));

        if (options.stop_after && *options.stop_after == step) break;
    }
    return trace;
}

}  // namespace tamperscan

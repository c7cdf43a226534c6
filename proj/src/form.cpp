#include "tamperscan/form.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <regex>
#include <unordered_map>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"

namespace tamperscan {

std::string_view to_string(ControlKind kind) {
    switch (kind) {
        case ControlKind::Text: return "text";
        case ControlKind::Hidden: return "hidden";
        case ControlKind::Password: return "password";
        case ControlKind::Radio: return "radio";
        case ControlKind::Checkbox: return "checkbox";
        case ControlKind::Select: return "select";
        case ControlKind::TextArea: return "textarea";
    }
    return "text";
}

std::string_view to_string(ParamSource source) {
    switch (source) {
        case ParamSource::UserInput: return "user-input";
        case ParamSource::HiddenField: return "hidden-field";
        case ParamSource::QueryString: return "query-string";
        case ParamSource::Cookie: return "cookie";
    }
    return "user-input";
}

ParamSource param_source_from_string(std::string_view text) {
    if (text == "hidden-field") return ParamSource::HiddenField;
    if (text == "query-string") return ParamSource::QueryString;
    if (text == "cookie") return ParamSource::Cookie;
    if (text == "user-input") return ParamSource::UserInput;
    throw ParseError("unknown parameter source '" + std::string(text) + "'");
}

const InputControl* Form::control(std::string_view name) const {
    for (const auto& c : controls) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

namespace {

std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_double(std::string_view text) {
    double out = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return out;
}

// HTML "valid floating-point number".
std::optional<double> parse_html_number(std::string_view text) {
    static const std::regex kNumber(R"(^-?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?$)");
    std::string s(text);
    if (!std::regex_match(s, kNumber)) return std::nullopt;
    if (!s.empty() && s[0] == '.') s.insert(s.begin(), '0');
    if (s.rfind("-.", 0) == 0) s.insert(1, "0");
    return parse_double(s);
}

std::size_t codepoints(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

// Compiled-pattern cache. nullptr marks a malformed pattern (warned once).
const std::regex* compiled(const std::string& pattern, bool anchored) {
    thread_local std::unordered_map<std::string, std::optional<std::regex>> cache;
    std::string key = (anchored ? "A:" : "S:") + pattern;
    auto it = cache.find(key);
    if (it == cache.end()) {
        std::optional<std::regex> re;
        try {
            re.emplace(anchored ? "^(?:" + pattern + ")$" : pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            spdlog::warn("ignoring malformed pattern '{}': {}", pattern, e.what());
        }
        it = cache.emplace(std::move(key), std::move(re)).first;
    }
    return it->second ? &*it->second : nullptr;
}

ControlKind kind_for_input_type(std::string_view type) {
    if (type == "hidden") return ControlKind::Hidden;
    if (type == "password") return ControlKind::Password;
    if (type == "radio") return ControlKind::Radio;
    if (type == "checkbox") return ControlKind::Checkbox;
    return ControlKind::Text;
}

void read_constraints(InputControl& c, const Node& n) {
    c.required = n.has_attribute("required");
    if (const auto* p = n.attribute("pattern")) c.pattern = *p;
    if (const auto* v = n.attribute("min")) c.min = parse_html_number(trim(*v));
    if (const auto* v = n.attribute("max")) c.max = parse_html_number(trim(*v));
    if (const auto* v = n.attribute("maxlength")) {
        std::size_t len = 0;
        std::string t = trim(*v);
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), len);
        if (ec == std::errc{} && ptr == t.data() + t.size()) c.maxlength = len;
    }
    if (const auto* v = n.attribute("class")) c.class_attr = *v;
    if (const auto* v = n.attribute("id")) c.id = *v;
}

InputControl control_from_spec(const nlohmann::json& spec, std::size_t form_index) {
    InputControl c;
    c.name = spec.at("name").get<std::string>();
    c.type_attr = spec.value("type", std::string("text"));
    c.kind = c.type_attr == "select" ? ControlKind::Select : kind_for_input_type(c.type_attr);
    c.default_value = spec.value("value", std::string());
    c.required = spec.value("required", false);
    if (spec.contains("pattern")) c.pattern = spec.at("pattern").get<std::string>();
    if (spec.contains("min")) c.min = spec.at("min").get<double>();
    if (spec.contains("max")) c.max = spec.at("max").get<double>();
    if (spec.contains("maxlength")) c.maxlength = spec.at("maxlength").get<std::size_t>();
    c.label = spec.value("label", std::string());
    c.class_attr = spec.value("class", std::string());
    if (spec.contains("options")) c.options = spec.at("options").get<std::vector<std::string>>();
    c.locator = Locator::form_control(form_index, c.name);
    c.revealed = true;
    return c;
}

}  // namespace

ClvDescriptor ClvDescriptor::parse(std::string_view json_text) {
    auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError("data-clv is not a JSON object");
    ClvDescriptor clv;
    try {
        clv.ajax = doc.value("ajax", false);
        for (const auto& r : doc.value("validate", nlohmann::json::array())) {
            ValidateRule rule;
            rule.field = r.at("field").get<std::string>();
            if (r.contains("pattern")) {
                rule.kind = ValidateRule::Kind::Pattern;
                rule.pattern = r.at("pattern").get<std::string>();
            } else if (r.contains("min") || r.contains("max")) {
                rule.kind = ValidateRule::Kind::Range;
                rule.min = r.value("min", -std::numeric_limits<double>::infinity());
                rule.max = r.value("max", std::numeric_limits<double>::infinity());
            } else if (r.contains("required")) {
                if (!r.at("required").get<bool>()) continue;
                rule.kind = ValidateRule::Kind::Required;
            } else if (r.contains("equals")) {
                rule.kind = ValidateRule::Kind::Equals;
                rule.equals = r.at("equals").get<std::string>();
            } else {
                throw ConfigError("validate rule for '" + rule.field + "' has no constraint");
            }
            clv.validate.push_back(std::move(rule));
        }
        for (const auto& t : doc.value("transform", nlohmann::json::array())) {
            TransformRule rule;
            rule.target = t.at("target").get<std::string>();
            auto fn = t.at("fn").get<std::string>();
            if (fn == "base64concat") {
                rule.fn = TransformRule::Fn::Base64Concat;
            } else if (fn == "concat") {
                rule.fn = TransformRule::Fn::Concat;
            } else {
                throw ConfigError("unknown transform function '" + fn + "'");
            }
            rule.inputs = t.at("inputs").get<std::vector<std::string>>();
            rule.sep = t.value("sep", std::string());
            clv.transform.push_back(std::move(rule));
        }
        for (const auto& r : doc.value("reveal", nlohmann::json::array())) {
            RevealRule rule;
            rule.when_field = r.at("when").at("field").get<std::string>();
            rule.when_equals = r.at("when").at("equals").get<std::string>();
            for (const auto& spec : r.at("add")) rule.add.push_back(control_from_spec(spec, 0));
            clv.reveal.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed data-clv: ") + e.what());
    }
    return clv;
}

std::vector<Form> extract_forms(const Document& doc) {
    std::map<std::string, std::string> label_for;
    for (std::size_t li : doc.elements_named("label")) {
        if (const auto* target = doc.node(li).attribute("for")) label_for.emplace(*target, trim(doc.text_content(li)));
    }

    std::vector<Form> forms;
    for (std::size_t fi : doc.elements_named("form")) {
        const Node& fnode = doc.node(fi);
        Form form;
        form.index = forms.size();
        if (const auto* a = fnode.attribute("action")) form.action = *a;
        if (const auto* m = fnode.attribute("method")) {
            form.method = *m;
            std::transform(form.method.begin(), form.method.end(), form.method.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (form.method != "post") form.method = "get";
        }
        if (const auto* id = fnode.attribute("id")) form.id = *id;
        if (const auto* clv = fnode.attribute("data-clv")) {
            form.clv = ClvDescriptor::parse(*clv);
            for (auto& rule : form.clv->reveal) {
                for (auto& c : rule.add) c.locator = Locator::form_control(form.index, c.name);
            }
            if (form.clv->ajax) form.mode = SubmissionMode::Ajax;
        }

        std::string last_text;
        // Pre-order walk of the form subtree.
        std::vector<std::size_t> stack(fnode.children.rbegin(), fnode.children.rend());
        while (!stack.empty()) {
            std::size_t i = stack.back();
            stack.pop_back();
            const Node& n = doc.node(i);
            if (n.kind == Node::Kind::Text) {
                auto t = trim(n.text);
                if (!t.empty()) last_text = t;
                continue;
            }
            auto label_of = [&](const InputControl& c) {
                if (!c.id.empty()) {
                    if (auto it = label_for.find(c.id); it != label_for.end()) return it->second;
                }
                return last_text;
            };
            auto button_locator = [&]() {
                const auto* id = n.attribute("id");
                return id && !id->empty() ? Locator::element_id(*id) : Locator::child_path(doc.path_of(i));
            };

            if (n.name == "input") {
                std::string type = n.attribute("type") ? *n.attribute("type") : "text";
                std::transform(type.begin(), type.end(), type.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                if (type == "submit" || type == "image") {
                    form.buttons.push_back({button_locator(), n.attribute("id") ? *n.attribute("id") : "",
                                            n.attribute("value") ? *n.attribute("value") : ""});
                    continue;
                }
                if (type == "button" || type == "reset" || type == "file") continue;
                const auto* name = n.attribute("name");
                if (!name || name->empty()) continue;
                InputControl c;
                c.name = *name;
                c.type_attr = type;
                c.kind = kind_for_input_type(type);
                read_constraints(c, n);
                const auto* value = n.attribute("value");
                c.default_value = value ? *value : (c.kind == ControlKind::Checkbox ? "on" : "");
                c.checked = n.has_attribute("checked");
                c.label = label_of(c);
                c.locator = Locator::form_control(form.index, c.name);
                form.controls.push_back(std::move(c));
                continue;
            }
            if (n.name == "button") {
                std::string type = n.attribute("type") ? *n.attribute("type") : "submit";
                if (type == "submit") {
                    form.buttons.push_back({button_locator(), n.attribute("id") ? *n.attribute("id") : "",
                                            n.attribute("value") ? *n.attribute("value") : trim(doc.text_content(i))});
                }
                continue;
            }
            if (n.name == "select" || n.name == "textarea") {
                const auto* name = n.attribute("name");
                if (!name || name->empty()) continue;
                InputControl c;
                c.name = *name;
                c.kind = n.name == "select" ? ControlKind::Select : ControlKind::TextArea;
                c.type_attr = n.name;
                read_constraints(c, n);
                if (c.kind == ControlKind::Select) {
                    std::optional<std::string> selected;
                    for (std::size_t oi : doc.elements_named("option")) {
                        // Options belonging to this select.
                        std::size_t p = doc.node(oi).parent;
                        while (p != Document::root() && p != i) p = doc.node(p).parent;
                        if (p != i) continue;
                        const auto* v = doc.node(oi).attribute("value");
                        std::string value = v ? *v : trim(doc.text_content(oi));
                        if (!selected && doc.node(oi).has_attribute("selected")) selected = value;
                        c.options.push_back(std::move(value));
                    }
                    c.default_value = selected ? *selected : (c.options.empty() ? "" : c.options.front());
                } else {
                    c.default_value = doc.text_content(i);
                }
                c.label = label_of(c);
                c.locator = Locator::form_control(form.index, c.name);
                form.controls.push_back(std::move(c));
                continue;  // option text is not label text
            }
            for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
        }
        forms.push_back(std::move(form));
    }
    return forms;
}

std::optional<std::size_t> form_of_button(const std::vector<Form>& forms, const Locator& button) {
    for (const auto& f : forms) {
        for (const auto& b : f.buttons) {
            if (b.locator == button) return f.index;
            if (button.kind == Locator::Kind::Id && b.id == button.id) return f.index;
        }
    }
    return std::nullopt;
}

std::optional<std::pair<std::size_t, std::string>> resolve_control(const Document& doc,
                                                                  const std::vector<Form>& forms,
                                                                  const Locator& locator) {
    if (locator.kind == Locator::Kind::FormControl) {
        if (locator.form_index >= forms.size()) return std::nullopt;
        const Form& f = forms[locator.form_index];
        if (f.control(locator.name)) return std::pair{f.index, locator.name};
        if (f.clv) {
            for (const auto& rule : f.clv->reveal) {
                for (const auto& c : rule.add) {
                    if (c.name == locator.name) return std::pair{f.index, locator.name};
                }
            }
        }
        return std::nullopt;
    }
    if (locator.kind == Locator::Kind::Id) {
        for (const auto& f : forms) {
            for (const auto& c : f.controls) {
                if (!c.id.empty() && c.id == locator.id) return std::pair{f.index, c.name};
            }
        }
        return std::nullopt;
    }
    if (locator.kind == Locator::Kind::Path) {
        auto node = doc.resolve(locator);
        if (!node) return std::nullopt;
        const auto* name = doc.node(*node).attribute("name");
        if (!name) return std::nullopt;
        for (const auto& f : forms) {
            if (f.control(*name)) return std::pair{f.index, *name};
        }
    }
    return std::nullopt;
}

FieldValues default_values(const Form& form) {
    FieldValues values;
    for (const auto& c : form.controls) {
        if (c.kind == ControlKind::Radio || c.kind == ControlKind::Checkbox) {
            if (c.checked && !values.contains(c.name)) values[c.name] = c.default_value;
            continue;
        }
        values.emplace(c.name, c.default_value);
    }
    return values;
}

std::vector<Param> extract_params(const Form& form, const Url& page_url) {
    std::vector<Param> params;
    auto values = default_values(form);
    std::vector<std::string> seen;
    for (const auto& c : form.controls) {
        if (std::find(seen.begin(), seen.end(), c.name) != seen.end()) continue;
        auto it = values.find(c.name);
        if (it == values.end()) continue;
        seen.push_back(c.name);
        params.push_back({c.name, it->second, c.source(), c.locator});
    }
    Url action = resolve(page_url, form.action);
    for (auto& [name, value] : form_decode(action.query)) {
        params.push_back({name, value, ParamSource::QueryString, Locator::form_control(form.index, name)});
    }
    return params;
}

Form apply_reveal(const Form& form, const FieldValues& values) {
    if (!form.clv) return form;
    Form out = form;
    for (const auto& rule : form.clv->reveal) {
        auto it = values.find(rule.when_field);
        if (it == values.end() || it->second != rule.when_equals) continue;
        for (const auto& c : rule.add) {
            if (out.control(c.name)) continue;
            InputControl added = c;
            added.locator = Locator::form_control(form.index, c.name);
            added.revealed = true;
            out.controls.push_back(std::move(added));
        }
    }
    return out;
}

FieldValues apply_preprocessing(const Form& form, FieldValues values) {
    if (!form.clv) return values;
    for (const auto& rule : form.clv->transform) {
        std::string joined;
        for (std::size_t i = 0; i < rule.inputs.size(); ++i) {
            const auto& input = rule.inputs[i];
            if (!form.control(input)) {
                throw ConfigError("transform for '" + rule.target + "' references missing field '" + input + "'");
            }
            if (i) joined += rule.sep;
            auto it = values.find(input);
            if (it != values.end()) joined += it->second;
        }
        values[rule.target] = rule.fn == TransformRule::Fn::Base64Concat ? base64_encode(joined) : joined;
    }
    return values;
}

namespace {

void check_html_constraints(const Form& form, const std::string& name, const FieldValues& values,
                            std::vector<Violation>& out) {
    std::vector<const InputControl*> group;
    for (const auto& c : form.controls) {
        if (c.name == name) group.push_back(&c);
    }
    const InputControl& first = *group.front();
    if (first.kind == ControlKind::Hidden) return;  // browsers never validate hidden inputs

    auto it = values.find(name);
    bool present = it != values.end();
    const std::string value = present ? it->second : std::string();
    auto violate = [&](std::string constraint) { out.push_back({name, std::move(constraint)}); };

    bool required = std::any_of(group.begin(), group.end(), [](const auto* c) { return c->required; });
    if (required && value.empty()) {
        violate("required");
        return;
    }
    if (!present || value.empty()) return;

    if (first.kind == ControlKind::Radio || first.kind == ControlKind::Checkbox) {
        bool known = std::any_of(group.begin(), group.end(), [&](const auto* c) { return c->default_value == value; });
        if (!known) violate("option");
        return;
    }
    if (first.kind == ControlKind::Select) {
        if (std::find(first.options.begin(), first.options.end(), value) == first.options.end()) violate("option");
        return;
    }
    if (first.pattern) {
        if (const auto* re = compiled(*first.pattern, true); re && !std::regex_match(value, *re)) violate("pattern");
    }
    bool numeric_type = first.type_attr == "number" || first.type_attr == "range";
    if (numeric_type || first.min || first.max) {
        auto number = parse_html_number(value);
        if (!number) {
            violate("type");
        } else {
            if (first.min && *number < *first.min) violate("min");
            if (first.max && *number > *first.max) violate("max");
        }
    } else if (first.type_attr == "date") {
        static const std::regex kDate(R"(^\d{4}-\d{2}-\d{2}$)");
        if (!std::regex_match(value, kDate)) violate("type");
    } else if (first.type_attr == "time") {
        static const std::regex kTime(R"(^\d{2}:\d{2}(?::\d{2})?$)");
        if (!std::regex_match(value, kTime)) violate("type");
    }
    if (first.maxlength && codepoints(value) > *first.maxlength) violate("maxlength");
}

}  // namespace

Prepared prepare_submission(const Form& form, FieldValues values) {
    Prepared out;
    out.form = apply_reveal(form, values);
    for (const auto& c : out.form.controls) {
        if (!c.revealed) continue;
        out.revealed.push_back(c.name);
        if (c.kind != ControlKind::Radio && c.kind != ControlKind::Checkbox) values.emplace(c.name, c.default_value);
    }
    out.values = apply_preprocessing(out.form, std::move(values));

    std::vector<std::string> names;
    for (const auto& c : out.form.controls) {
        if (std::find(names.begin(), names.end(), c.name) == names.end()) names.push_back(c.name);
    }
    for (const auto& name : names) check_html_constraints(out.form, name, out.values, out.verdict.violations);

    if (out.form.clv) {
        for (const auto& rule : out.form.clv->validate) {
            auto it = out.values.find(rule.field);
            const std::string value = it == out.values.end() ? std::string() : it->second;
            switch (rule.kind) {
                case ValidateRule::Kind::Required:
                    if (value.empty()) out.verdict.violations.push_back({rule.field, "required"});
                    break;
                case ValidateRule::Kind::Pattern:
                    if (const auto* re = compiled(rule.pattern, false); re && !std::regex_search(value, *re)) {
                        out.verdict.violations.push_back({rule.field, "pattern"});
                    }
                    break;
                case ValidateRule::Kind::Range: {
                    auto number = parse_html_number(value);
                    if (!number || *number < rule.min || *number > rule.max) {
                        out.verdict.violations.push_back({rule.field, "range"});
                    }
                    break;
                }
                case ValidateRule::Kind::Equals:
                    if (value != rule.equals) out.verdict.violations.push_back({rule.field, "equals"});
                    break;
            }
        }
    }
    return out;
}

Verdict validate_client_side(const Form& form, const FieldValues& values) {
    return prepare_submission(form, values).verdict;
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

}  // namespace tamperscan
